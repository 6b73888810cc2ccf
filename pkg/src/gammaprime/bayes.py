"""
Plug-in ("semi-Bayes") posteriors on a binned effect grid.

A prior for the raw effect (log OR) is a finite mixture of bin mid-values.
It is *dressed* into noncentralities xi_i = sqrt(N) * mu_i / sigma_hat using
the observed table's sigma_hat, updated with the density of the observed
test statistic, and *undressed* back to an effect scale.

Only the scale of the support changes between steps; bin probabilities are
carried along unchanged until the update.
"""

import io
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import effect_core as ec
from .errors import AllZeroLikelihood, InvalidLevel, InvalidSpec

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ScaleTag(str, Enum):
    NONCENTRALITY = "noncentrality"
    GAMMA_PRIME = "gamma_prime"
    LOG_OR = "log_or"


class Density(str, Enum):
    NORMAL = "normal_noncentral"
    CHISQ1 = "chisq1_noncentral"


def _as_density(density):
    if isinstance(density, Density):
        return density
    aliases = {"normal": Density.NORMAL, "chisq1": Density.CHISQ1}
    return aliases.get(density) or Density(density)


def _float_array(values):
    a = np.array(values, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscretePrior:
    """Prior over a raw effect given as bin mid-values and probabilities."""

    bin_mid: np.ndarray
    bin_prob: np.ndarray

    def __post_init__(self):
        mid = _float_array(self.bin_mid)
        prob = _float_array(self.bin_prob)
        object.__setattr__(self, "bin_mid", mid)
        object.__setattr__(self, "bin_prob", prob)
        if mid.ndim != 1 or mid.shape != prob.shape:
            raise InvalidSpec("bin_mid and bin_prob must be 1-d of equal length")
        if mid.size < 2:
            raise InvalidSpec("a prior needs at least two bins")
        if not np.all(np.diff(mid) > 0):
            raise InvalidSpec("bin_mid must be strictly increasing")
        if np.any(prob < 0) or not np.all(np.isfinite(prob)):
            raise InvalidSpec("bin probabilities must be finite and nonnegative")
        if abs(prob.sum() - 1.0) > 1e-12:
            raise InvalidSpec(f"bin probabilities sum to {prob.sum()!r}, not 1")

    @property
    def n_bins(self):
        return self.bin_mid.size

    def mean(self):
        return float(np.dot(self.bin_mid, self.bin_prob))


@dataclass(frozen=True, eq=False)
class DressedPrior:
    xi: np.ndarray
    bin_prob: np.ndarray
    n: float
    sigma_hat: float
    bin_mid: np.ndarray


@dataclass(frozen=True, eq=False)
class DiscretePosterior:
    support: np.ndarray
    prob: np.ndarray
    scale_tag: ScaleTag

    def __post_init__(self):
        object.__setattr__(self, "support", _float_array(self.support))
        object.__setattr__(self, "prob", _float_array(self.prob))
        object.__setattr__(self, "scale_tag", ScaleTag(self.scale_tag))
        if self.support.shape != self.prob.shape or self.support.ndim != 1:
            raise ValueError("support and prob must be 1-d of equal length")

    def mean(self):
        return float(np.dot(self.support, self.prob))


@dataclass(frozen=True)
class TruncNormMixtureSpec:
    """Mixture of a narrow null and a wide alternative, both zero-centred
    normals truncated symmetrically to |x| <= trunc."""

    null_sd: float = 0.001
    null_trunc: float = 0.01
    alt_sd: float = 0.67
    alt_trunc: float = 4.8
    mix_null: float = 0.5

    def validate(self):
        for name in ("null_sd", "null_trunc", "alt_sd", "alt_trunc"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidSpec(f"{name} must be positive, got {val}")
        if not 0.0 <= self.mix_null <= 1.0:
            raise InvalidSpec(f"mix_null must lie in [0, 1], got {self.mix_null}")
        return self


# ---------------------------------------------------------------------------
# Building priors


def effect_grid(n_bins=1001, half_width=4.8):
    """Equal-width bins on [-half_width, half_width]; returns (edges, mids)."""
    edges = np.linspace(-half_width, half_width, n_bins + 1)
    # force exact mirror symmetry so an odd grid has a mid of exactly 0
    edges = 0.5 * (edges - edges[::-1])
    mids = 0.5 * (edges[:-1] + edges[1:])
    return edges, 0.5 * (mids - mids[::-1])


def truncnorm_bin_masses(edges, sd, trunc):
    """Exact bin masses of Normal(0, sd) truncated to |x| <= trunc."""
    lo = np.clip(edges[:-1], -trunc, trunc) / sd
    hi = np.clip(edges[1:], -trunc, trunc) / sd
    # difference of cdfs on the left half, of survival functions on the right,
    # keeps precision in both tails
    mass = np.where(
        hi <= 0,
        stats.norm.cdf(hi) - stats.norm.cdf(lo),
        stats.norm.sf(lo) - stats.norm.sf(hi),
    )
    return mass / (1.0 - 2.0 * stats.norm.sf(trunc / sd))


def _normalized(prob):
    prob = np.asarray(prob, dtype=float)
    return prob / math.fsum(prob)


def build_mixture_prior(spec=None, n_bins=1001, method="quadrature", n_draws=7_000_000, seed=None):
    """Binned two-component truncated-normal mixture over [-alt_trunc, alt_trunc].

    ``method="quadrature"`` integrates each component exactly over every bin;
    ``method="sampling"`` histograms ``n_draws`` draws from the mixture.
    """
    spec = (spec or TruncNormMixtureSpec()).validate()
    if n_bins < 16:
        raise InvalidSpec("n_bins must be at least 16")
    edges, mids = effect_grid(n_bins, spec.alt_trunc)
    if method == "quadrature":
        prob = spec.mix_null * truncnorm_bin_masses(edges, spec.null_sd, spec.null_trunc) + (
            1.0 - spec.mix_null
        ) * truncnorm_bin_masses(edges, spec.alt_sd, spec.alt_trunc)
    elif method == "sampling":
        rng = np.random.default_rng(seed)
        n_null = rng.binomial(n_draws, spec.mix_null)
        draws = np.concatenate(
            [
                _truncnorm_draws(spec.null_sd, spec.null_trunc, n_null, rng),
                _truncnorm_draws(spec.alt_sd, spec.alt_trunc, n_draws - n_null, rng),
            ]
        )
        counts, _ = np.histogram(draws, bins=edges)
        prob = counts
    else:
        raise InvalidSpec(f"unknown method {method!r}")
    return DiscretePrior(mids, _normalized(prob))


def _truncnorm_draws(sd, trunc, size, rng):
    c = trunc / sd
    return stats.truncnorm.rvs(-c, c, scale=sd, size=size, random_state=rng)


def build_normal_prior(sd, n_bins=1001, half_width=4.8):
    """Binned Normal(0, sd) restricted to [-half_width, half_width]."""
    if not sd > 0:
        raise InvalidSpec("sd must be positive")
    edges, mids = effect_grid(n_bins, half_width)
    return DiscretePrior(mids, _normalized(truncnorm_bin_masses(edges, sd, half_width)))


# ---------------------------------------------------------------------------
# Dress, update, undress


def dress(prior, n, sigma_hat):
    """Map raw effects to noncentralities xi = sqrt(n) * mu / sigma_hat."""
    if not (n > 0 and sigma_hat > 0):
        raise ValueError("n and sigma_hat must be positive")
    return DressedPrior(
        xi=_float_array(math.sqrt(n) * prior.bin_mid / sigma_hat),
        bin_prob=prior.bin_prob,
        n=float(n),
        sigma_hat=float(sigma_hat),
        bin_mid=prior.bin_mid,
    )


def log_likelihood(t, xi, density=Density.NORMAL):
    """log f(t | xi) for each noncentrality.

    For the chi-square form the statistic is t**2 with noncentrality xi**2.
    At t = 0 the factor 1/(2|t|), which is common to every bin, is dropped.
    """
    density = _as_density(density)
    xi = np.asarray(xi, dtype=float)
    if density is Density.NORMAL:
        return -0.5 * (t - xi) ** 2 - _LOG_SQRT_2PI
    r = abs(t)
    a = np.abs(xi)
    kernel = np.logaddexp(-0.5 * (r - a) ** 2, -0.5 * (r + a) ** 2) - _LOG_SQRT_2PI - math.log(2.0)
    return kernel - math.log(r) if r > 0 else kernel


def posterior_update(dressed, t_observed, density=Density.NORMAL):
    """Posterior bin probabilities given an observed statistic.

    Accumulates in log space so that distant bins cannot underflow the
    normalizing sum.  The result lives on the noncentrality scale.
    """
    with np.errstate(divide="ignore"):
        logw = np.log(dressed.bin_prob) + log_likelihood(t_observed, dressed.xi, density)
    top = np.max(logw)
    if not np.isfinite(top):
        raise AllZeroLikelihood(f"no bin has positive posterior weight at t = {t_observed}")
    w = np.exp(logw - top)
    return DiscretePosterior(dressed.xi, w / math.fsum(w), ScaleTag.NONCENTRALITY)


def undress(posterior, n, var_gamma_prime_hat):
    """Noncentralities to gamma_prime via xi * sqrt(Var(gamma_prime_hat)) / sqrt(n)."""
    _require_scale(posterior, ScaleTag.NONCENTRALITY)
    scale = math.sqrt(var_gamma_prime_hat) / math.sqrt(n)
    return DiscretePosterior(posterior.support * scale, posterior.prob, ScaleTag.GAMMA_PRIME)


def undress_log_or(posterior, n, sigma_hat):
    """Noncentralities back to log OR via xi * sigma_hat / sqrt(n)."""
    _require_scale(posterior, ScaleTag.NONCENTRALITY)
    return DiscretePosterior(
        posterior.support * (sigma_hat / math.sqrt(n)), posterior.prob, ScaleTag.LOG_OR
    )


def to_gamma_prime(posterior):
    """Exact transform of a log-OR posterior to gamma_prime, bin by bin.

    Bins keep their order as long as the support stays inside the monotone
    range of gamma_prime (|log OR| < 4.7987).
    """
    _require_scale(posterior, ScaleTag.LOG_OR)
    return DiscretePosterior(
        ec.gamma_prime(posterior.support, warn=False), posterior.prob, ScaleTag.GAMMA_PRIME
    )


def _require_scale(posterior, tag):
    if posterior.scale_tag is not tag:
        raise ValueError(f"expected a {tag.value} posterior, got {posterior.scale_tag.value}")


def table_posterior(prior, table, density=Density.NORMAL):
    """dress -> update on Z -> undress for one analyzable table (log-OR scale)."""
    x = ec.log_odds_ratio(table)
    s = ec.sigma_hat(table)
    n = table.n
    z = float(ec.z_statistic(x, s, n))
    post = posterior_update(dress(prior, n, s), z, density)
    return undress_log_or(post, n, s)


# ---------------------------------------------------------------------------
# Summaries


class PosteriorSummary(NamedTuple):
    mean: float
    equal_tail: tuple
    hpd: tuple


def _bin_edges(support):
    if support.size == 1:
        return np.array([support[0], support[0]])
    mid = 0.5 * (support[:-1] + support[1:])
    first = support[0] - (mid[0] - support[0])
    last = support[-1] + (support[-1] - mid[-1])
    return np.concatenate([[first], mid, [last]])


def _quantile(support, prob, u):
    """Inverse of the CDF that spreads each bin's mass uniformly over the bin."""
    edges = _bin_edges(support)
    cdf = np.concatenate([[0.0], np.cumsum(prob)])
    i = int(np.searchsorted(cdf, u, side="left"))
    i = min(max(i, 1), support.size)
    while i > 1 and prob[i - 1] == 0.0:  # land on a bin that carries mass
        i -= 1
    frac = (u - cdf[i - 1]) / prob[i - 1] if prob[i - 1] > 0 else 0.0
    frac = min(max(frac, 0.0), 1.0)
    return float(edges[i - 1] + frac * (edges[i] - edges[i - 1]))


def hpd_bins(posterior, level):
    """Indices of the fewest highest-probability bins holding >= level mass.

    Ties in probability go to the bin closer to the posterior mean.
    """
    prob = posterior.prob
    dist = np.abs(posterior.support - posterior.mean())
    order = np.lexsort((dist, -prob))
    cum = np.cumsum(prob[order])
    m = int(np.searchsorted(cum, level - 1e-12, side="left"))
    return np.sort(order[: min(m, prob.size - 1) + 1])


def summarize_posterior(posterior, level=0.95):
    """Posterior mean, equal-tail interval and HPD interval at ``level``.

    The HPD interval is the span of the bins chosen by :func:`hpd_bins`.
    """
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must lie in (0, 1), got {level}")
    support, prob = posterior.support, posterior.prob
    order = np.argsort(support, kind="stable")
    s_sorted, p_sorted = support[order], prob[order]
    tail = 0.5 * (1.0 - level)
    equal_tail = (_quantile(s_sorted, p_sorted, tail), _quantile(s_sorted, p_sorted, 1.0 - tail))
    chosen = support[hpd_bins(posterior, level)]
    return PosteriorSummary(posterior.mean(), equal_tail, (float(chosen.min()), float(chosen.max())))


# ---------------------------------------------------------------------------
# Year-by-year chaining


def rebin(support, prob, grid):
    """Move mass at arbitrary points onto an increasing grid.

    Each point's mass is split between its two flanking grid points in
    proportion to distance, which keeps total mass and the mean; points
    outside the grid go to the nearest end.
    """
    support = np.asarray(support, dtype=float)
    prob = np.asarray(prob, dtype=float)
    grid = np.asarray(grid, dtype=float)
    s = np.clip(support, grid[0], grid[-1])
    right = np.clip(np.searchsorted(grid, s, side="left"), 1, grid.size - 1)
    left = right - 1
    frac = (s - grid[left]) / (grid[right] - grid[left])
    out = np.bincount(left, weights=prob * (1.0 - frac), minlength=grid.size)
    out += np.bincount(right, weights=prob * frac, minlength=grid.size)
    return out


def sequential_update(tables, initial, density=Density.NORMAL, scale=ScaleTag.GAMMA_PRIME):
    """Chain posteriors over an ordered list of analyzable tables.

    Each table's posterior (dressed and undressed with that table's own
    sigma_hat and N) is re-binned onto the initial grid and becomes the next
    table's prior.  The final posterior is returned on ``scale``
    (``gamma_prime`` or ``log_or``).
    """
    tables = list(tables)
    if not tables:
        raise ValueError("sequential_update needs at least one table")
    scale = ScaleTag(scale)
    grid = initial.bin_mid
    current = initial
    for k, table in enumerate(tables):
        try:
            post = table_posterior(current, table, density)
        except AllZeroLikelihood as exc:
            raise AllZeroLikelihood(f"table {k}: {exc}", index=k) from exc
        prob = rebin(post.support, post.prob, grid)
        current = DiscretePrior(grid, prob / math.fsum(prob))
    final = DiscretePosterior(current.bin_mid, current.bin_prob, ScaleTag.LOG_OR)
    if scale is ScaleTag.LOG_OR:
        return final
    if scale is ScaleTag.GAMMA_PRIME:
        return to_gamma_prime(final)
    raise ValueError("sequential_update returns a log_or or gamma_prime posterior")


# ---------------------------------------------------------------------------
# Two-column CSV with the scale in the header


def format_float(x):
    return format(float(x), ".17g")


def dumps_distribution(support, prob, scale_tag):
    buf = io.StringIO()
    buf.write(f"support[{ScaleTag(scale_tag).value}],probability\n")
    for s, p in zip(support, prob):
        buf.write(f"{format_float(s)},{format_float(p)}\n")
    return buf.getvalue()


def save_distribution(dist, path):
    """Write a DiscretePrior (tagged log_or) or DiscretePosterior to CSV."""
    if isinstance(dist, DiscretePrior):
        text = dumps_distribution(dist.bin_mid, dist.bin_prob, ScaleTag.LOG_OR)
    else:
        text = dumps_distribution(dist.support, dist.prob, dist.scale_tag)
    with open(os.fspath(path), "w", newline="") as fh:
        fh.write(text)


def loads_distribution(text):
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty distribution file")
    head = lines[0].strip()
    if not (head.startswith("support[") and head.endswith("],probability")):
        raise ValueError(f"unrecognized header {head!r}")
    tag = ScaleTag(head[len("support[") : -len("],probability")])
    rows = [ln.split(",") for ln in lines[1:] if ln.strip()]
    support = [float(r[0]) for r in rows]
    prob = [float(r[1]) for r in rows]
    return DiscretePosterior(support, prob, tag)


def load_distribution(path):
    with open(os.fspath(path)) as fh:
        return loads_distribution(fh.read())


def load_prior(path):
    dist = load_distribution(path)
    if dist.scale_tag is not ScaleTag.LOG_OR:
        raise ValueError(f"a prior must be on the log_or scale, got {dist.scale_tag.value}")
    return DiscretePrior(dist.support, dist.prob)
