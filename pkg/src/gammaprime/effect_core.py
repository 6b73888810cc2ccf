"""
Closed-form statistics for a single 2x2 table or a given log odds ratio.

Table layout (rows are disease status, columns exposure status)::

              E      not E
    D        n11     n12      n_D = n11 + n12
    not D    n21     n22      n_Dbar = n21 + n22

The standardized log odds ratio ``log(OR) / sigma`` is bounded in absolute
value by the Laplace Limit Constant (LLC ~ 0.6627), attained at
``log(OR) ~ 4.7987``.  Dividing the bound ``gamma`` by the LLC gives the
normalized effect size ``gamma_prime`` in [-1, 1].

All functions taking a log OR accept scalars or numpy arrays.
"""

import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import DegenerateTable, OutOfMonotoneRange

# Reference value used only as a cross-check of the root finder below.
_LLC_REFERENCE = 0.662743419349182


def _solve_llc():
    """Solve y*tanh(y) = 1 by Newton's method safeguarded with bisection.

    Returns (llc, y) where llc = y / cosh(y) = max_x x / (4 cosh(x/4)).
    """
    lo, hi = 1.0, 2.0  # g(1) < 0 < g(2)
    y = 1.0
    for _ in range(200):
        g = y * math.tanh(y) - 1.0
        if g < 0:
            lo = y
        else:
            hi = y
        if abs(g) <= 1e-15:
            break
        dg = math.tanh(y) + y / math.cosh(y) ** 2
        y_new = y - g / dg
        if not lo < y_new < hi:
            y_new = 0.5 * (lo + hi)
        if y_new == y:
            break
        y = y_new
    return y / math.cosh(y), y


LLC, _Y_STAR = _solve_llc()
if abs(LLC - _LLC_REFERENCE) > 1e-12:  # pragma: no cover - defect guard
    raise RuntimeError(f"LLC root finder disagrees with reference: {LLC!r}")

#: log(OR) at which gamma peaks; gamma_prime is monotone inside (-X, X).
LOG_OR_AT_MAX = 4.0 * _Y_STAR


def llc_constant():
    """The Laplace Limit Constant, max_x x / (4 cosh(x/4))."""
    return LLC


def log_or_at_max():
    """The maximizing log odds ratio, 4 * y* with y* tanh(y*) = 1."""
    return LOG_OR_AT_MAX


def _sech(y):
    a = np.abs(y)
    e = np.exp(-a)
    return 2.0 * e / (1.0 + e * e)


# ---------------------------------------------------------------------------
# Tables


@dataclass(frozen=True)
class TwoByTwoTable:
    """Cell counts; reals are allowed so that the +1/2 correction fits.

    An all-zero table can be built (so it can be corrected) but not analyzed.
    """

    n11: float
    n12: float
    n21: float
    n22: float

    def __post_init__(self):
        cells = self.cells
        if not all(math.isfinite(c) for c in cells):
            raise ValueError(f"non-finite cell count in {cells}")
        if min(cells) < 0:
            raise ValueError(f"negative cell count in {cells}")

    @classmethod
    def from_sequence(cls, values):
        values = [float(v) for v in values]
        if len(values) != 4:
            raise ValueError(f"expected 4 cell counts, got {len(values)}")
        return cls(*values)

    @property
    def cells(self):
        return (self.n11, self.n12, self.n21, self.n22)

    @property
    def n(self):
        return self.n11 + self.n12 + self.n21 + self.n22

    @property
    def n_cases(self):
        return self.n11 + self.n12

    @property
    def n_controls(self):
        return self.n21 + self.n22

    @property
    def p_hat(self):
        """Exposure proportion among cases (nan if there are no cases)."""
        return self.n11 / self.n_cases if self.n_cases > 0 else math.nan

    @property
    def q_hat(self):
        """Exposure proportion among controls (nan if there are no controls)."""
        return self.n21 / self.n_controls if self.n_controls > 0 else math.nan

    @property
    def w_hat(self):
        """Proportion of cases."""
        return self.n_cases / self.n if self.n > 0 else math.nan

    def is_degenerate(self):
        return min(self.cells) <= 0


def haldane_correct(table):
    """Return a new table with 1/2 added to every cell."""
    return TwoByTwoTable(*(c + 0.5 for c in table.cells))


def _check_analyzable(table):
    p, q, w = table.p_hat, table.q_hat, table.w_hat
    for name, val in (("p_hat", p), ("q_hat", q), ("w_hat", w)):
        if not 0.0 < val < 1.0:
            raise DegenerateTable(
                f"{name} = {val} for table {table.cells}; apply haldane_correct"
            )
    return p, q, w


def log_odds_ratio(table):
    _check_analyzable(table)
    return math.log(table.n11) + math.log(table.n22) - math.log(table.n12) - math.log(table.n21)


def sigma_population(p, q, w):
    """sigma from exposure probabilities among cases (p) and controls (q)
    and the case fraction w, so that Var(log OR_hat) ~ sigma**2 / N."""
    return np.sqrt(1.0 / (w * p * (1.0 - p)) + 1.0 / ((1.0 - w) * q * (1.0 - q)))


def sigma_hat(table):
    """Plug-in sigma of a table, sqrt(N * sum(1 / n_ij)).

    Same value as ``sigma_population(p_hat, q_hat, w_hat)``, but the count
    form avoids cancellation in 1 - w when one margin is tiny.
    """
    _check_analyzable(table)
    return float(sigma_hat_from_counts(*table.cells))


def sigma_hat_from_counts(n11, n12, n21, n22):
    """Vectorized sqrt(N * sum(1/n_ij)); cells must be positive."""
    n11, n12, n21, n22 = (np.asarray(c, dtype=float) for c in (n11, n12, n21, n22))
    n = n11 + n12 + n21 + n22
    return np.sqrt(n * (1.0 / n11 + 1.0 / n12 + 1.0 / n21 + 1.0 / n22))


def sigma_exposure_form(v, pr_d_given_e, odds_ratio):
    """sigma parameterized by Pr(E) = v and the risk Pr(D|E), at a fixed OR."""
    a = np.asarray(pr_d_given_e, dtype=float)
    b = 1.0 / (1.0 - odds_ratio * (1.0 - 1.0 / a))  # Pr(D | not E)
    return np.sqrt(1.0 / (v * a * (1.0 - a)) + 1.0 / ((1.0 - v) * b * (1.0 - b)))


# ---------------------------------------------------------------------------
# gamma, gamma prime and the two Wald statistics


def gamma_of_log_or(x):
    """Maximal standardized log OR, x / (4 cosh(x/4)); bounded by the LLC."""
    x = np.asarray(x, dtype=float)
    out = 0.25 * x * _sech(0.25 * x)
    return out[()] if out.ndim == 0 else out


def gamma_of_odds_ratio(odds_ratio):
    """Same quantity written in terms of OR: log(OR) / (2 sqrt(2 + (1+OR)/sqrt(OR)))."""
    r = np.asarray(odds_ratio, dtype=float)
    out = np.log(r) / (2.0 * np.sqrt(2.0 + (1.0 + r) / np.sqrt(r)))
    return out[()] if out.ndim == 0 else out


def gamma_prime(x, warn=True):
    """Normalized effect size gamma / LLC in [-1, 1].

    Warns with :class:`OutOfMonotoneRange` when any |x| exceeds the
    maximizing log OR; the value is still returned.
    """
    x = np.asarray(x, dtype=float)
    if warn and np.any(np.abs(x) > LOG_OR_AT_MAX):
        warnings.warn(
            f"|log OR| > {LOG_OR_AT_MAX:.4f}: gamma_prime is no longer monotone",
            OutOfMonotoneRange,
            stacklevel=2,
        )
    return gamma_of_log_or(x) / LLC


def z_statistic(log_or, sigma_hat, n):
    """Classical Wald statistic sqrt(n) * log OR / sigma_hat."""
    return np.sqrt(n) * np.asarray(log_or, dtype=float) / sigma_hat


def gamma_prime_derivative(x):
    """d gamma_prime / d log OR."""
    x = np.asarray(x, dtype=float)
    return _sech(x / 4.0) * (4.0 - x * np.tanh(x / 4.0)) / (16.0 * LLC)


def var_gamma_prime(log_or, sigma_hat):
    """Delta-method variance of gamma_prime_hat, scaled by N (like sigma**2)."""
    return np.asarray(sigma_hat, dtype=float) ** 2 * gamma_prime_derivative(log_or) ** 2


def z_t_ratio(log_or):
    """Z / T, a function of log OR alone: (4 - x tanh(x/4)) / 4."""
    x = np.asarray(log_or, dtype=float)
    return (4.0 - x * np.tanh(x / 4.0)) / 4.0


def wald_t(log_or, sigma_hat, n):
    """sqrt(n) * gamma_prime_hat / sd(gamma_prime_hat), defined for any log OR.

    Inside the monotone range this equals :func:`t_statistic`.  Beyond it the
    standard deviation uses |d gamma_prime / dx|, so the sign follows log OR;
    exactly at the bound the value is +-inf.
    """
    x = np.asarray(log_or, dtype=float)
    denom = np.abs(4.0 - x * np.tanh(x / 4.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.sqrt(n) * 4.0 * x / (np.asarray(sigma_hat, dtype=float) * denom)
    t = np.where(denom == 0.0, np.copysign(np.inf, x), t)
    t = np.where(x == 0.0, 0.0, t)
    return t[()] if t.ndim == 0 else t


def t_statistic(log_or, sigma_hat, n):
    """Wald statistic for H0: gamma_prime = 0.

    sqrt(n) * 4 x / (sigma_hat * (4 - x tanh(x/4))) with x = log OR.
    Raises :class:`OutOfMonotoneRange` when |x| >= the maximizing log OR.
    """
    x = np.asarray(log_or, dtype=float)
    if np.any(np.abs(x) >= LOG_OR_AT_MAX):
        raise OutOfMonotoneRange(
            f"T is undefined for |log OR| >= {LOG_OR_AT_MAX:.6f}"
        )
    t = np.sqrt(n) * 4.0 * x / (np.asarray(sigma_hat, dtype=float) * (4.0 - x * np.tanh(x / 4.0)))
    return t[()] if t.ndim == 0 else t


def p_two_sided(stat):
    """Two-sided normal p-value, 2 * (1 - Phi(|stat|))."""
    return 2.0 * stats.norm.sf(np.abs(stat))


def p_chisq1(stat):
    """Upper tail of chi-square(1) at stat**2; equals :func:`p_two_sided`."""
    return stats.chi2.sf(np.square(stat), df=1)


# ---------------------------------------------------------------------------
# Yule's coefficients


class YuleCoefficients(NamedTuple):
    y: float
    q: float
    var_y: float
    var_q: float


def yule_coefficients(table):
    """Yule's Y (colligation) and Q with first-order variances.

    The variances are written in terms of p_hat, q_hat, w_hat and N and agree
    with Yule's count forms (1 - Y^2)^2 / 16 * sum(1/n_ij) and
    (1 - Q^2)^2 / 4 * sum(1/n_ij).
    """
    p, q, w = _check_analyzable(table)
    n = table.n
    x = log_odds_ratio(table)
    y_coef = math.tanh(x / 4.0)
    q_coef = math.tanh(x / 2.0)

    root = math.sqrt(p * (1.0 - q) / ((1.0 - p) * q)) + 1.0
    var_y = (
        p / ((1.0 - w) * (1.0 - p) * q**2 * root**4)
        + (1.0 - q) / (w * (1.0 - p) ** 2 * q * root**4)
    ) / n
    d4 = (p + q - 2.0 * p * q) ** 4
    var_q = (
        4.0 * (1.0 - p) * p * (q - 1.0) ** 2 * q**2 / (w * d4)
        - 4.0 * (p - 1.0) ** 2 * p**2 * (q - 1.0) * q / ((1.0 - w) * d4)
    ) / n
    return YuleCoefficients(y_coef, q_coef, var_y, var_q)


# ---------------------------------------------------------------------------
# Where the bound is attained


@dataclass(frozen=True)
class BoundAnalysis:
    odds_ratio: float
    v_m: float
    w_m: float
    pr_d_given_e: float
    pr_d_given_not_e: float
    rr: float
    sigma_min: float
    gamma_at_bound: float


def sigma_bound_analysis(odds_ratio):
    """Parameters minimizing sigma at a fixed OR, and the resulting gamma."""
    if not odds_ratio > 0:
        raise ValueError("odds ratio must be positive")
    s = math.sqrt(odds_ratio)
    pr_de = 1.0 - 1.0 / (1.0 + s)
    pr_dne = 1.0 / (1.0 + s)
    rr = pr_de / pr_dne
    v_m = 1.0 / (1.0 + rr / s)
    # exposure probabilities among cases / controls at v = v_m
    pr_d = v_m * pr_de + (1.0 - v_m) * pr_dne
    p = pr_de * v_m / pr_d
    q = (1.0 - pr_de) * v_m / (1.0 - pr_d)
    w_m = 1.0 / (1.0 + (p / q) / s)
    sigma_min = 2.0 * math.sqrt(2.0 + (1.0 + odds_ratio) / s)
    return BoundAnalysis(
        odds_ratio=odds_ratio,
        v_m=v_m,
        w_m=w_m,
        pr_d_given_e=pr_de,
        pr_d_given_not_e=pr_dne,
        rr=rr,
        sigma_min=sigma_min,
        gamma_at_bound=math.log(odds_ratio) / sigma_min,
    )


def rho_approx(log_or, v, w):
    """Approximate phi correlation of two binary variables from log OR.

    v is the exposure prevalence and w the case fraction.
    """
    return log_or * np.sqrt(v * (1.0 - v)) * np.sqrt(w * (1.0 - w))


# ---------------------------------------------------------------------------
# Everything for one table


@dataclass(frozen=True)
class EffectEstimate:
    table: TwoByTwoTable
    corrected: bool
    n: float
    log_or: float
    sigma_hat: float
    delta: float
    z: float
    gamma: float
    gamma_prime: float
    var_gamma_prime: float
    t: float
    p_two_sided_z: float
    p_two_sided_t: float
    yule_y: float
    yule_q: float
    var_yule_y: float
    var_yule_q: float
    out_of_range: bool

    def to_dict(self):
        d = asdict(self)
        d["table"] = list(self.table.cells)
        return d


def analyze_table(table, correct=False):
    """Compute every per-table statistic.

    With ``correct=True`` the +1/2 correction is applied first; otherwise a
    table with an empty row or exposure column raises :class:`DegenerateTable`.
    When |log OR| is past the monotone range, ``t`` falls back to
    :func:`wald_t`, ``out_of_range`` is set and a warning is issued.
    """
    if correct:
        table = haldane_correct(table)
    n = table.n
    x = log_odds_ratio(table)
    s = sigma_hat(table)
    out_of_range = abs(x) >= LOG_OR_AT_MAX
    if out_of_range:
        warnings.warn(
            f"log OR = {x:.4f} is outside the monotone range of gamma_prime",
            OutOfMonotoneRange,
            stacklevel=2,
        )
        t = float(wald_t(x, s, n))
    else:
        t = float(t_statistic(x, s, n))
    z = float(z_statistic(x, s, n))
    yule = yule_coefficients(table)
    g = float(gamma_of_log_or(x))
    return EffectEstimate(
        table=table,
        corrected=correct,
        n=n,
        log_or=x,
        sigma_hat=s,
        delta=x / s,
        z=z,
        gamma=g,
        gamma_prime=g / LLC,
        var_gamma_prime=float(var_gamma_prime(x, s)),
        t=t,
        p_two_sided_z=float(p_two_sided(z)),
        p_two_sided_t=float(p_two_sided(t)),
        yule_y=yule.y,
        yule_q=yule.q,
        var_yule_y=yule.var_y,
        var_yule_q=yule.var_q,
        out_of_range=out_of_range,
    )
