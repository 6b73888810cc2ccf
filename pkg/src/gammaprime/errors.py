"""Exception and warning types raised across the package."""


class GammaPrimeError(Exception):
    """Base class for all package errors."""


class DegenerateTable(GammaPrimeError, ValueError):
    """A 2x2 table has a zero margin or an exposure proportion of 0 or 1.

    Apply :func:`gammaprime.effect_core.haldane_correct` first.
    """


class OutOfMonotoneRange(UserWarning, ValueError):
    """|log OR| reached the point where gamma stops increasing (about 4.7987).

    Issued as a warning by :func:`gamma_prime` (the value is still defined)
    and raised by :func:`t_statistic`, whose denominator vanishes there.
    """


class InvalidSpec(GammaPrimeError, ValueError):
    pass


class InvalidLevel(GammaPrimeError, ValueError):
    pass


class InvalidNuisance(GammaPrimeError, ValueError):
    pass


class AllZeroLikelihood(GammaPrimeError, FloatingPointError):
    """Every bin received zero posterior weight."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SeparationDetected(GammaPrimeError, ArithmeticError):
    pass


class NoConvergence(GammaPrimeError, ArithmeticError):
    pass


class ParseError(GammaPrimeError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateKey(ParseError):
    pass


class NegativeCount(ParseError):
    pass
