"""Normalized odds-ratio effect size, its Wald test, and plug-in posteriors."""

from .effect_core import (
    LLC,
    LOG_OR_AT_MAX,
    EffectEstimate,
    TwoByTwoTable,
    analyze_table,
    gamma_prime,
    haldane_correct,
)

__version__ = "0.1.0"

__all__ = [
    "LLC",
    "LOG_OR_AT_MAX",
    "EffectEstimate",
    "TwoByTwoTable",
    "analyze_table",
    "gamma_prime",
    "haldane_correct",
]
