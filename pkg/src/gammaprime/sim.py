"""Monte Carlo engine: test size and power, selection bias, logistic bound.

Random streams are derived from ``(seed, index)`` pairs with
:func:`numpy.random.default_rng`, so a run gives the same numbers whether
it executes serially or across worker processes.  Rejection counts are
reduced as integers.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from . import bayes
from . import effect_core as ec
from .errors import InvalidNuisance, InvalidSpec, NoConvergence, SeparationDetected

# replicates per RNG stream in the frequentist simulation
BLOCK_SIZE = 8192


class EffectMode(str, Enum):
    FIXED = "fixed_log_or"
    RANDOM = "random_log_or"


class Predictor(str, Enum):
    CONTINUOUS = "continuous_mixture"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class FrequentistSimConfig:
    """One cell of a size/power study.

    ``nuisance`` gives the bounds of the uniform draw of the control
    exposure probability q.  With ``effect_mode`` fixed, every replicate uses
    ``log_or``; with random mode, log OR ~ N(0, tau) per replicate.
    """

    n_cases: int
    case_control_ratio: float = 1.0
    effect_mode: EffectMode = EffectMode.FIXED
    log_or: float = 0.0
    tau: float = 0.42
    nuisance: tuple = (0.05, 0.95)
    n_reps: int = 10_000
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "effect_mode", EffectMode(self.effect_mode))
        object.__setattr__(self, "nuisance", tuple(float(v) for v in self.nuisance))
        if int(self.n_cases) != self.n_cases or self.n_cases < 2:
            raise InvalidSpec("n_cases must be an integer >= 2")
        if self.n_reps < 1:
            raise InvalidSpec("n_reps must be >= 1")
        if not self.case_control_ratio > 0:
            raise InvalidSpec("case_control_ratio must be positive")
        if round(self.case_control_ratio * self.n_cases) < 1:
            raise InvalidSpec("no controls at this case_control_ratio")
        if not self.tau >= 0:
            raise InvalidSpec("tau must be >= 0")
        if not 0 < self.alpha < 1:
            raise InvalidSpec("alpha must lie in (0, 1)")
        if not np.isfinite(self.log_or):
            raise InvalidSpec("log_or must be finite")
        lo, hi = self.nuisance
        if not 0 < lo <= hi < 1:
            raise InvalidNuisance(f"nuisance bounds {self.nuisance} must satisfy 0 < lo <= hi < 1")

    @property
    def n_controls(self) -> int:
        return int(round(self.case_control_ratio * self.n_cases))


@dataclass(frozen=True)
class SelectionSimConfig:
    """Select the largest of ``l_tests`` Z statistics and study its estimates.

    ``n`` is the total sample size per table, split evenly between cases and
    controls.  True log ORs are drawn from ``prior`` (by default the binned
    N(0, tau) on the log-OR scale), and the same prior is used for the
    posterior.
    """

    l_tests: int
    n: int
    tau: float = 0.42
    n_reps: int = 1000
    prior: Optional[bayes.DiscretePrior] = None
    level: float = 0.95
    nuisance: tuple = (0.05, 0.95)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nuisance", tuple(float(v) for v in self.nuisance))
        if self.l_tests < 1:
            raise InvalidSpec("l_tests must be >= 1")
        if self.n < 4:
            raise InvalidSpec("n must be >= 4")
        if self.n_reps < 1:
            raise InvalidSpec("n_reps must be >= 1")
        if not 0 < self.level < 1:
            raise InvalidSpec("level must lie in (0, 1)")
        if not self.tau > 0 and self.prior is None:
            raise InvalidSpec("tau must be positive when no prior is given")
        lo, hi = self.nuisance
        if not 0 < lo <= hi < 1:
            raise InvalidNuisance(f"nuisance bounds {self.nuisance} must satisfy 0 < lo <= hi < 1")

    def generating_prior(self) -> bayes.DiscretePrior:
        return self.prior if self.prior is not None else bayes.build_normal_prior(self.tau)


@dataclass(frozen=True)
class LogisticSimConfig:
    """Data-generating setup for one logistic-regression design.

    The continuous predictor is a two-component normal mixture (means mu0,
    mu1, common sd s, weight w on the Y = 1 component).  The Bernoulli
    predictor has success probability ``v``; the outcome then has
    Pr(Y=1 | X=0) = q and Pr(Y=1 | X=1) = p.  Covariates are standard normal
    with N(0, 1) coefficients drawn per dataset.
    """

    mu0: float = 0.0
    mu1: float = 1.0
    s: float = 1.0
    w: float = 0.5
    n: int = 2000
    covariate_count: int = 0
    predictor: Predictor = Predictor.CONTINUOUS
    p: float = 0.5
    q: float = 0.5
    v: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "predictor", Predictor(self.predictor))
        if not self.s > 0:
            raise InvalidSpec("s must be positive")
        if not 0 < self.w < 1:
            raise InvalidSpec("w must lie in (0, 1)")
        if self.n < 2:
            raise InvalidSpec("n must be >= 2")
        if self.covariate_count < 0:
            raise InvalidSpec("covariate_count must be >= 0")
        for name in ("p", "q", "v"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidSpec(f"{name} must lie in (0, 1)")

    @property
    def beta(self) -> float:
        if self.predictor is Predictor.BERNOULLI:
            return float(special.logit(self.p) - special.logit(self.q))
        return (self.mu1 - self.mu0) / self.s**2

    @property
    def alpha(self) -> float:
        if self.predictor is Predictor.BERNOULLI:
            return float(special.logit(self.q))
        return -(math.log((1 - self.w) / self.w) + self.beta * (self.mu0 + self.mu1) / 2)


def _mc_se(rate, n):
    return math.sqrt(rate * (1.0 - rate) / n)


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def config_to_dict(config) -> dict:
    out = {}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if isinstance(value, bayes.DiscretePrior):
            value = f"discrete[{value.n_bins}]"
        elif value is None:
            value = "normal(tau)" if f.name == "prior" else None
        out[f.name] = _plain(value)
    return out


@dataclass
class SimulationReport:
    """Result of one simulated scenario cell.

    Every rate or mean carries a Monte Carlo standard error.  Fields that do
    not apply to the run kind are None.
    """

    kind: str
    config: dict
    seed: int
    n_reps: int
    count_z: Optional[int] = None
    count_t: Optional[int] = None
    rate_z: Optional[float] = None
    rate_t: Optional[float] = None
    mc_se_z: Optional[float] = None
    mc_se_t: Optional[float] = None
    mean_true_gamma_prime: Optional[float] = None
    mean_posterior_gamma_prime: Optional[float] = None
    mean_hat_gamma_prime: Optional[float] = None
    coverage: Optional[float] = None
    mc_se_true: Optional[float] = None
    mc_se_posterior: Optional[float] = None
    mc_se_hat: Optional[float] = None
    mc_se_coverage: Optional[float] = None
    mc_se_hat_minus_true: Optional[float] = None
    mc_se_posterior_minus_true: Optional[float] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def flat(self) -> dict:
        """Config fields followed by the non-empty result columns."""
        row = {k: v for k, v in self.config.items()}
        for k, v in self.to_dict().items():
            if k in ("config", "kind") or v is None:
                continue
            row[k] = v
        return row


def _format_cell(value):
    if isinstance(value, float):
        return bayes.format_float(value)
    if isinstance(value, list):
        return " ".join(_format_cell(v) for v in value)
    return "" if value is None else str(value)


def reports_to_csv(reports: Sequence[SimulationReport]) -> str:
    """One row per scenario cell; floats with 17 significant digits."""
    rows = [r.flat() for r in reports]
    columns = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format_cell(row.get(k)) for k in columns})
    return buf.getvalue()


def reports_to_json(reports: Sequence[SimulationReport]) -> str:
    # repr of a Python float is the shortest string that round-trips
    return json.dumps([r.flat() if isinstance(r, LogisticBoundReport) else r.to_dict() for r in reports], indent=2)


# ---------------------------------------------------------------------------
# table sampling


def exposure_prob_cases(q, log_or):
    """p with p/(1-p) = OR * q/(1-q)."""
    return special.expit(special.logit(q) + log_or)


def sample_table(log_or: float, n_cases: int, ratio: float, q: float, rng) -> ec.TwoByTwoTable:
    """Draw one product-binomial 2x2 table.

    Cases (row 1) are exposed with probability p derived from q and OR,
    controls (row 2) with probability q.

    >>> t = sample_table(0.0, 50, 1.0, 0.3, np.random.default_rng(0))
    >>> t.n_cases, t.n_controls
    (50.0, 50.0)
    """
    if not 0 < q < 1:
        raise InvalidNuisance(f"control exposure probability q={q} is not in (0, 1)")
    p = float(exposure_prob_cases(q, log_or))
    if not 0 < p < 1:
        raise InvalidNuisance(f"case exposure probability p={p} is not in (0, 1)")
    n_controls = int(round(ratio * n_cases))
    n11 = int(rng.binomial(n_cases, p))
    n21 = int(rng.binomial(n_controls, q))
    return ec.TwoByTwoTable(n11, n_cases - n11, n21, n_controls - n21)


def sample_counts(log_or, n_cases, n_controls, q, rng):
    """Vectorized :func:`sample_table`; returns integer arrays (n11, n12, n21, n22)."""
    q = np.asarray(q, dtype=float)
    p = exposure_prob_cases(q, log_or)
    if np.any((q <= 0) | (q >= 1)) or np.any((p <= 0) | (p >= 1)):
        raise InvalidNuisance("exposure probability left (0, 1)")
    n11 = rng.binomial(n_cases, p)
    n21 = rng.binomial(n_controls, q)
    return n11, n_cases - n11, n21, n_controls - n21


def _corrected_stats(n11, n12, n21, n22):
    """Haldane-corrected log OR, sigma_hat, N, Z and T for count arrays."""
    a, b, c, d = (np.asarray(v, dtype=float) + 0.5 for v in (n11, n12, n21, n22))
    x = np.log(a) + np.log(d) - np.log(b) - np.log(c)
    n = a + b + c + d
    s = ec.sigma_hat_from_counts(a, b, c, d)
    z = np.sqrt(n) * x / s
    t = ec.wald_t(x, s, n)
    return x, s, n, z, t


# ---------------------------------------------------------------------------
# size and power


def parallel_map(func, items, workers):
    if workers is None or workers <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _frequentist_block(args):
    config, block = args
    start = block * BLOCK_SIZE
    size = min(BLOCK_SIZE, config.n_reps - start)
    rng = np.random.default_rng([config.seed, block])
    if config.effect_mode is EffectMode.FIXED:
        log_or = np.full(size, float(config.log_or))
    else:
        log_or = rng.normal(0.0, config.tau, size)
    lo, hi = config.nuisance
    q = rng.uniform(lo, hi, size)
    counts = sample_counts(log_or, config.n_cases, config.n_controls, q, rng)
    _, _, _, z, t = _corrected_stats(*counts)
    crit = stats.norm.isf(config.alpha / 2)
    return int(np.count_nonzero(np.abs(z) > crit)), int(np.count_nonzero(np.abs(t) > crit))


def simulate_frequentist(config: FrequentistSimConfig, workers: Optional[int] = None) -> SimulationReport:
    """Rejection rates of the two-sided Z and T tests at level ``alpha``."""
    n_blocks = -(-config.n_reps // BLOCK_SIZE)
    counts = parallel_map(_frequentist_block, [(config, b) for b in range(n_blocks)], workers)
    cz = sum(c[0] for c in counts)
    ct = sum(c[1] for c in counts)
    rz, rt = cz / config.n_reps, ct / config.n_reps
    return SimulationReport(
        kind="frequentist",
        config=config_to_dict(config),
        seed=config.seed,
        n_reps=config.n_reps,
        count_z=cz,
        count_t=ct,
        rate_z=rz,
        rate_t=rt,
        mc_se_z=_mc_se(rz, config.n_reps),
        mc_se_t=_mc_se(rt, config.n_reps),
    )


# ---------------------------------------------------------------------------
# selection of the largest statistic


def _selection_replicate(config, prior, rep):
    rng = np.random.default_rng([config.seed, rep])
    idx = rng.choice(prior.n_bins, size=config.l_tests, p=prior.bin_prob)
    mu = prior.bin_mid[idx]
    lo, hi = config.nuisance
    q = rng.uniform(lo, hi, config.l_tests)
    n_cases = config.n // 2
    counts = sample_counts(mu, n_cases, config.n - n_cases, q, rng)
    x, _, _, z, _ = _corrected_stats(*counts)
    k = int(np.argmax(z))
    table = ec.TwoByTwoTable(*(float(c[k]) + 0.5 for c in counts))
    post = bayes.to_gamma_prime(bayes.table_posterior(prior, table))
    summary = bayes.summarize_posterior(post, config.level)
    truth = float(ec.gamma_prime(mu[k], warn=False))
    covered = summary.hpd[0] <= truth <= summary.hpd[1]
    return truth, summary.mean, float(ec.gamma_prime(x[k], warn=False)), covered


def _selection_chunk(args):
    config, prior, reps = args
    return [_selection_replicate(config, prior, r) for r in reps]


def simulate_selection(config: SelectionSimConfig, workers: Optional[int] = None) -> SimulationReport:
    """Average true, posterior-mean and plug-in gamma' of the top-Z test."""
    prior = config.generating_prior()
    n_chunks = max(1, min(config.n_reps, 8 * (workers or 1)))
    chunks = np.array_split(np.arange(config.n_reps), n_chunks)
    parts = parallel_map(_selection_chunk, [(config, prior, c.tolist()) for c in chunks], workers)
    res = np.array([row for part in parts for row in part], dtype=float)
    truth, post, hat, cov = res.T
    n = config.n_reps

    def se(v):
        return float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")

    coverage = float(cov.mean())
    return SimulationReport(
        kind="selection",
        config=config_to_dict(config),
        seed=config.seed,
        n_reps=n,
        mean_true_gamma_prime=float(truth.mean()),
        mean_posterior_gamma_prime=float(post.mean()),
        mean_hat_gamma_prime=float(hat.mean()),
        coverage=coverage,
        mc_se_true=se(truth),
        mc_se_posterior=se(post),
        mc_se_hat=se(hat),
        mc_se_coverage=_mc_se(coverage, n),
        mc_se_hat_minus_true=se(hat - truth),
        mc_se_posterior_minus_true=se(post - truth),
    )


# ---------------------------------------------------------------------------
# logistic regression


@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    slopes: np.ndarray
    information: np.ndarray
    covariance: np.ndarray
    n_iter: int

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.slopes])

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def fit_logistic(X, y, max_iter: int = 100, tol: float = 1e-10, max_coef: float = 30.0) -> LogisticFit:
    """Maximum-likelihood logistic regression by IRLS with step halving.

    ``X`` excludes the intercept column, which is added here.  Convergence
    means the gradient of the mean log-likelihood has max-norm <= ``tol``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different numbers of rows")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be 0/1")
    n = y.size
    D = np.column_stack([np.ones(n), X])
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise ValueError("design matrix is rank deficient")

    def loglik(b):
        eta = D @ b
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    beta = np.zeros(D.shape[1])
    ll = loglik(beta)
    for it in range(1, max_iter + 1):
        mu = special.expit(D @ beta)
        wts = mu * (1.0 - mu)
        grad = D.T @ (y - mu)
        if np.max(np.abs(grad)) / n <= tol:
            break
        if wts.sum() < 1e-300 * n or np.max(wts) == 0.0:
            raise SeparationDetected("IRLS weights underflowed")
        info = (D * wts[:, None]).T @ D
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationDetected("information matrix became singular") from exc
        for _ in range(30):
            trial = beta + step
            ll_trial = loglik(trial)
            if ll_trial >= ll - 1e-12 * abs(ll):
                break
            step = step / 2
        beta, ll = trial, ll_trial
        if np.max(np.abs(beta[1:])) > max_coef:
            raise SeparationDetected(f"slope magnitude exceeded {max_coef}")
    else:
        raise NoConvergence(f"IRLS did not converge in {max_iter} iterations")
    mu = special.expit(D @ beta)
    info = (D * (mu * (1.0 - mu))[:, None]).T @ D
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SeparationDetected("information matrix is singular at the fit") from exc
    return LogisticFit(float(beta[0]), beta[1:].copy(), info, cov, it)


def sample_logistic_data(config: LogisticSimConfig, rng):
    """Draw (X, y) for one dataset; the predictor of interest is column 0."""
    n = config.n
    Z = rng.normal(size=(n, config.covariate_count))
    gamma = rng.normal(size=config.covariate_count)
    if config.predictor is Predictor.BERNOULLI:
        x = (rng.uniform(size=n) < config.v).astype(float)
        y = (rng.uniform(size=n) < special.expit(config.alpha + config.beta * x + Z @ gamma)).astype(float)
    else:
        label = rng.uniform(size=n) < config.w
        x = np.where(label, config.mu1, config.mu0) + config.s * rng.normal(size=n)
        if config.covariate_count == 0:
            # the mixture itself implies the logistic model for Y | X
            y = label.astype(float)
        else:
            eta = config.alpha + config.beta * x + Z @ gamma
            y = (rng.uniform(size=n) < special.expit(eta)).astype(float)
    return np.column_stack([x, Z]), y


@dataclass
class LogisticBoundReport:
    standardized_slopes: np.ndarray
    n_datasets: int
    n_separated: int
    n_failed: int
    config: dict = field(default_factory=dict)

    @property
    def min(self) -> float:
        return float(self.standardized_slopes.min()) if self.standardized_slopes.size else float("nan")

    @property
    def max(self) -> float:
        return float(self.standardized_slopes.max()) if self.standardized_slopes.size else float("nan")

    @property
    def max_abs(self) -> float:
        s = self.standardized_slopes
        return float(np.abs(s).max()) if s.size else float("nan")

    def to_dict(self) -> dict:
        return {
            "n_datasets": self.n_datasets,
            "n_fitted": int(self.standardized_slopes.size),
            "n_separated": self.n_separated,
            "n_failed": self.n_failed,
            "min": self.min,
            "max": self.max,
            "max_abs": self.max_abs,
        }

    def flat(self) -> dict:
        return {**self.config, **self.to_dict()}


def standardized_slope(config: LogisticSimConfig, rng) -> float:
    """beta_hat / sqrt(Var(beta_hat) * N) for one simulated dataset."""
    X, y = sample_logistic_data(config, rng)
    fit = fit_logistic(X, y)
    return float(fit.slopes[0] / math.sqrt(fit.covariance[1, 1] * config.n))


def simulate_logistic_bound(configs, n_datasets: int = 1) -> LogisticBoundReport:
    """Fit ``n_datasets`` datasets per config and collect standardized slopes.

    Dataset k of a config draws from the stream ``(config.seed, k)``.
    Separated or unfittable datasets are skipped and counted.
    """
    echo = {}
    if isinstance(configs, LogisticSimConfig):
        echo = config_to_dict(configs)
        configs = [configs]
    slopes = []
    separated = failed = total = 0
    for cfg in configs:
        for k in range(n_datasets):
            total += 1
            rng = np.random.default_rng([cfg.seed, k])
            try:
                slopes.append(standardized_slope(cfg, rng))
            except SeparationDetected:
                separated += 1
            except (NoConvergence, ValueError):
                failed += 1
    return LogisticBoundReport(np.array(slopes), total, separated, failed, echo)


NEAR_EXTREMAL = dict(p=0.9168, q=0.0832, v=0.5)


def random_logistic_configs(n_configs: int, n: int = 2000, seed: int = 0, extremal_every: int = 10):
    """Mixed random designs; every ``extremal_every``-th one sits near the bound.

    The near-extremal design is a Bernoulli predictor with v = 1/2 and
    Pr(Y=1 | X=1) close to 0.917, where the standardized log OR peaks.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_configs):
        cov = int(rng.integers(0, 3))
        sub_seed = int(rng.integers(2**63))
        if extremal_every and k % extremal_every == 0:
            out.append(LogisticSimConfig(n=n, predictor=Predictor.BERNOULLI, seed=sub_seed, **NEAR_EXTREMAL))
        elif k % 2 == 0:
            mu0, mu1 = rng.normal(0.0, 2.0, 2)
            out.append(
                LogisticSimConfig(
                    mu0=float(mu0),
                    mu1=float(mu1),
                    s=float(rng.uniform(0.2, 3.0)),
                    w=float(rng.uniform(0.05, 0.95)),
                    n=n,
                    covariate_count=cov,
                    seed=sub_seed,
                )
            )
        else:
            p, q, v = (float(u) for u in rng.uniform(0.01, 0.99, 3))
            out.append(
                LogisticSimConfig(n=n, covariate_count=cov, predictor=Predictor.BERNOULLI, p=p, q=q, v=v, seed=sub_seed)
            )
    return out


# ---------------------------------------------------------------------------
# config files

_KIND_TYPES = {
    "frequentist": FrequentistSimConfig,
    "selection": SelectionSimConfig,
    "logistic": LogisticSimConfig,
}


def _coerce(kind_cls, key, raw):
    names = {f.name: f for f in dataclasses.fields(kind_cls)}
    if key not in names:
        raise InvalidSpec(f"unknown key {key!r} for {kind_cls.__name__}")
    raw = raw.strip()
    if key == "nuisance":
        parts = raw.replace(",", " ").split()
        if len(parts) != 2:
            raise InvalidSpec("nuisance needs two numbers: lo hi")
        return tuple(float(p) for p in parts)
    if key == "prior":
        if raw in ("normal", ""):
            return None
        if raw == "mixture":
            return bayes.build_mixture_prior()
        return bayes.load_prior(raw)
    if key in ("effect_mode", "predictor"):
        return raw
    default = names[key].default
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int) or key in ("n_cases", "l_tests", "n", "n_reps", "seed"):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise InvalidSpec(f"bad value for {key}: {raw!r}") from exc


def parse_config(text: str, seed: Optional[int] = None) -> list:
    """Parse a key=value simulation file into one config per scenario cell.

    A ``kind`` key selects frequentist, selection or logistic.  A value with
    ``|``-separated alternatives expands into a grid over all such keys.
    ``log_or`` may be given as ``odds_ratio`` instead.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    stripped = text.lstrip()
    if not stripped.startswith("["):
        text = "[simulation]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidSpec(f"cannot parse config: {exc}") from exc
    items = {}
    for section in parser.sections():
        items.update(parser.items(section))
    kind = items.pop("kind", "frequentist").strip()
    if kind not in _KIND_TYPES:
        raise InvalidSpec(f"unknown simulation kind {kind!r}")
    cls = _KIND_TYPES[kind]
    if "odds_ratio" in items:
        items["log_or"] = "|".join(str(math.log(float(v))) for v in items.pop("odds_ratio").split("|"))
    if seed is not None:
        items["seed"] = str(seed)
    keys = list(items)
    choices = [items[k].split("|") if k not in ("prior",) else [items[k]] for k in keys]
    configs = []
    for combo in itertools.product(*choices):
        kwargs = {k: _coerce(cls, k, v) for k, v in zip(keys, combo)}
        try:
            configs.append(cls(**kwargs))
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from exc
    return configs


def load_config(path, seed: Optional[int] = None) -> list:
    return parse_config(Path(path).read_text(), seed=seed)


def run_config(config, workers: Optional[int] = None, n_datasets: int = 100):
    """Dispatch one parsed config to its simulation."""
    if isinstance(config, FrequentistSimConfig):
        return simulate_frequentist(config, workers)
    if isinstance(config, SelectionSimConfig):
        return simulate_selection(config, workers)
    if isinstance(config, LogisticSimConfig):
        return simulate_logistic_bound(config, n_datasets)
    raise TypeError(f"not a simulation config: {type(config).__name__}")
