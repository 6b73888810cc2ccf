"""Batch analysis of per-pair, per-year 2x2 tables.

Input rows cross-classify item i by item j in one survey year.  Each
analyzable pair is chained through the years with the Bayesian update and
summarized on the gamma' scale.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import bayes
from . import effect_core as ec
from . import sim
from .errors import DuplicateKey, GammaPrimeError, InvalidLevel, NegativeCount, ParseError

HEADER = ("year", "item_i", "item_j", "n11", "n12", "n21", "n22")

DEFAULT_EXCLUSIONS = frozenset({(1, 10), (2, 11), (3, 4), (5, 15), (7, 14), (13, 15), (13, 17), (15, 17)})

REPORT_COLUMNS = (
    "item_i",
    "item_j",
    "posterior_mean_gamma_prime",
    "credible_low",
    "credible_high",
    "years_used",
    "flags",
)


@dataclass(frozen=True)
class PairTableRecord:
    year: int
    item_i: int
    item_j: int
    n11: int
    n12: int
    n21: int
    n22: int

    def __post_init__(self):
        if not self.item_i < self.item_j:
            raise ValueError(f"item_i must be < item_j, got ({self.item_i}, {self.item_j})")
        if min(self.n11, self.n12, self.n21, self.n22) < 0:
            raise ValueError("cell counts must be nonnegative")

    @property
    def pair(self) -> tuple:
        return (self.item_i, self.item_j)

    def table(self) -> ec.TwoByTwoTable:
        return ec.TwoByTwoTable(self.n11, self.n12, self.n21, self.n22)


@dataclass(frozen=True)
class PairPosteriorSummary:
    """Posterior summary of one item pair; NA fields are nan."""

    item_i: int
    item_j: int
    posterior_mean_gamma_prime: float
    credible_low: float
    credible_high: float
    years_used: int
    flags: tuple = ()

    @property
    def is_na(self) -> bool:
        return math.isnan(self.posterior_mean_gamma_prime)

    @property
    def failed(self) -> bool:
        return any(f.startswith("error") for f in self.flags)


# ---------------------------------------------------------------------------
# input


def _parse_count(raw, name, line):
    try:
        value = int(raw)
    except ValueError:
        raise ParseError(f"{name}={raw!r} is not an integer", line) from None
    if value < 0:
        raise NegativeCount(f"{name}={value} is negative", line)
    return value


def parse_pair_tables(text: str) -> list:
    """Parse CSV text with header ``year,item_i,item_j,n11,n12,n21,n22``.

    Returns records sorted by (item_i, item_j, year).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", 1) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise ParseError(f"expected header {','.join(HEADER)}", 1)
    seen = {}
    records = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} fields, got {len(row)}", line)
        year, i, j = (_parse_int(v, name, line) for v, name in zip(row[:3], HEADER[:3]))
        if i < 1 or j < 1:
            raise ParseError("item indices must be positive", line)
        if not i < j:
            raise ParseError(f"item_i must be < item_j, got ({i}, {j})", line)
        cells = [_parse_count(v.strip(), name, line) for v, name in zip(row[3:], HEADER[3:])]
        key = (year, i, j)
        if key in seen:
            raise DuplicateKey(f"duplicate key {key}, first seen on line {seen[key]}", line)
        seen[key] = line
        records.append(PairTableRecord(year, i, j, *cells))
    records.sort(key=lambda r: (r.item_i, r.item_j, r.year))
    return records


def _parse_int(raw, name, line):
    try:
        return int(raw.strip())
    except ValueError:
        raise ParseError(f"{name}={raw!r} is not an integer", line) from None


def load_pair_tables(path) -> list:
    return parse_pair_tables(Path(path).read_text())


def dumps_pair_tables(records: Iterable[PairTableRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow([r.year, r.item_i, r.item_j, r.n11, r.n12, r.n21, r.n22])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# exclusions


def exclusion_set(default: bool = True, extra: Iterable = ()) -> frozenset:
    """Pairs left out of the analysis; the default holds 8 item pairs."""
    base = set(DEFAULT_EXCLUSIONS) if default else set()
    for i, j in extra:
        base.add((min(i, j), max(i, j)))
    return frozenset(base)


def parse_exclusions(text: str) -> frozenset:
    """One pair per line as ``i,j`` or ``i-j``; ``#`` starts a comment."""
    pairs = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace("-", ",").split(",")
        if len(parts) != 2:
            raise ParseError(f"cannot read pair from {line!r}", line_no)
        i, j = (_parse_int(p, "item", line_no) for p in parts)
        if i == j:
            raise ParseError("a pair needs two distinct items", line_no)
        pairs.append((i, j))
    return exclusion_set(default=False, extra=pairs)


def load_exclusions(path) -> frozenset:
    return parse_exclusions(Path(path).read_text())


# ---------------------------------------------------------------------------
# analysis


def _na_summary(pair, flags, years_used=0):
    nan = float("nan")
    return PairPosteriorSummary(pair[0], pair[1], nan, nan, nan, years_used, tuple(flags))


def analyze_pair(pair, records: Sequence[PairTableRecord], prior: bayes.DiscretePrior, level: float):
    """Chain one pair's yearly tables in year order and summarize."""
    records = sorted(records, key=lambda r: r.year)
    tables = [ec.haldane_correct(r.table()) for r in records if r.table().n > 0]
    if not tables:
        return _na_summary(pair, ["no_data"])
    try:
        post = bayes.sequential_update(tables, prior, scale=bayes.ScaleTag.GAMMA_PRIME)
        s = bayes.summarize_posterior(post, level)
    except (GammaPrimeError, FloatingPointError, ValueError) as exc:
        return _na_summary(pair, [f"error:{type(exc).__name__}: {exc}"], len(tables))
    return PairPosteriorSummary(pair[0], pair[1], float(s.mean), float(s.hpd[0]), float(s.hpd[1]), len(tables))


def _analyze_chunk(args):
    jobs, prior, level = args
    return [analyze_pair(pair, recs, prior, level) for pair, recs in jobs]


def run_pipeline(
    records: Sequence[PairTableRecord],
    prior_spec: Optional[bayes.TruncNormMixtureSpec] = None,
    level: float = 0.95,
    exclusions: Optional[Iterable] = None,
    n_bins: int = 1001,
    workers: Optional[int] = None,
) -> list:
    """Posterior summaries, one per pair, ordered by (item_i, item_j).

    Pairs in ``exclusions`` (the default set when None) are reported with the
    flag ``excluded``; this includes excluded pairs among the observed items
    that have no rows at all.  Errors in one pair are recorded in its flags.
    """
    if not 0 < level < 1:
        raise InvalidLevel(f"level must lie in (0, 1), got {level}")
    excluded = exclusion_set() if exclusions is None else frozenset(exclusions)
    prior = bayes.build_mixture_prior(prior_spec, n_bins=n_bins)
    by_pair = defaultdict(list)
    for r in records:
        by_pair[r.pair].append(r)
    items = {i for pair in by_pair for i in pair}
    pairs = set(by_pair) | {p for p in excluded if p[0] in items and p[1] in items}

    out = {}
    jobs = []
    for pair in sorted(pairs):
        if pair in excluded:
            out[pair] = _na_summary(pair, ["excluded"])
        else:
            jobs.append((pair, by_pair[pair]))
    n_chunks = max(1, min(len(jobs), 4 * (workers or 1)))
    chunks = [jobs[k::n_chunks] for k in range(n_chunks)]
    for part in sim.parallel_map(_analyze_chunk, [(c, prior, level) for c in chunks if c], workers):
        for s in part:
            out[(s.item_i, s.item_j)] = s
    return [out[p] for p in sorted(out)]


# ---------------------------------------------------------------------------
# reports


def _fmt(x):
    return "NA" if math.isnan(x) else bayes.format_float(x)


def _cell(s, digits):
    if s is None or s.is_na:
        return "NA"
    return f"{s.posterior_mean_gamma_prime:.{digits}f} ({s.credible_low:.{digits}f}, {s.credible_high:.{digits}f})"


def render_matrix(summaries: Sequence[PairPosteriorSummary], n_items: Optional[int] = None, digits: int = 2) -> str:
    """Upper-triangular grid of ``mean (low, high)`` cells, rows 1..K-1 by columns 2..K.

    Cells for pairs that are missing or flagged NA read ``NA``.
    """
    if not summaries and n_items is None:
        return ""
    lookup = {(s.item_i, s.item_j): s for s in summaries}
    k = n_items or max(s.item_j for s in summaries)
    rows = [[""] + [str(j) for j in range(2, k + 1)]]
    for i in range(1, k):
        row = [str(i)]
        for j in range(2, k + 1):
            row.append(_cell(lookup.get((i, j)), digits) if j > i else "")
        rows.append(row)
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def summaries_to_csv(summaries: Sequence[PairPosteriorSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for s in summaries:
        writer.writerow(
            [
                s.item_i,
                s.item_j,
                _fmt(s.posterior_mean_gamma_prime),
                _fmt(s.credible_low),
                _fmt(s.credible_high),
                s.years_used,
                ";".join(s.flags),
            ]
        )
    return buf.getvalue()


def summaries_from_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise ParseError("not a pipeline report", 1)

    def num(v):
        return float("nan") if v == "NA" else float(v)

    return [
        PairPosteriorSummary(
            int(row["item_i"]),
            int(row["item_j"]),
            num(row["posterior_mean_gamma_prime"]),
            num(row["credible_low"]),
            num(row["credible_high"]),
            int(row["years_used"]),
            tuple(f for f in row["flags"].split(";") if f),
        )
        for row in reader
    ]


def summaries_to_json(summaries: Sequence[PairPosteriorSummary]) -> str:
    def val(x):
        return None if math.isnan(x) else x

    return json.dumps(
        [
            {
                "item_i": s.item_i,
                "item_j": s.item_j,
                "posterior_mean_gamma_prime": val(s.posterior_mean_gamma_prime),
                "credible_low": val(s.credible_low),
                "credible_high": val(s.credible_high),
                "years_used": s.years_used,
                "flags": list(s.flags),
            }
            for s in summaries
        ],
        indent=2,
    )


def emit_report(summaries: Sequence[PairPosteriorSummary], format: str = "matrix_text", path=None, **kwargs) -> str:
    """Serialize summaries as ``csv``, ``json`` or ``matrix_text``; optionally write to ``path``."""
    if format == "csv":
        text = summaries_to_csv(summaries)
    elif format == "json":
        text = summaries_to_json(summaries)
    elif format == "matrix_text":
        text = render_matrix(summaries, **kwargs)
    else:
        raise ValueError(f"unknown report format {format!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# synthetic data


SYNTHETIC_SEED = 2004


def generate_synthetic_pairs(
    n_items: int = 17,
    years: Sequence[int] = tuple(range(2004, 2015)),
    seed: int = SYNTHETIC_SEED,
    exclusions: Iterable = DEFAULT_EXCLUSIONS,
) -> list:
    """Synthetic co-occurrence tables with the shape of the real application.

    Item prevalence falls from 0.5 to 0.05 across items.  Each pair gets a
    fixed true log OR (zero for about a third of pairs, otherwise positive
    on average) and every year a fresh table of roughly 340 respondents.
    """
    excluded = frozenset(exclusions)
    prevalence = np.linspace(0.5, 0.05, n_items)
    records = []
    for i, j in combinations(range(1, n_items + 1), 2):
        if (i, j) in excluded:
            continue
        pair_rng = np.random.default_rng([seed, i, j])
        log_or = 0.0 if pair_rng.uniform() < 1 / 3 else float(pair_rng.normal(0.8, 0.6))
        for year in years:
            rng = np.random.default_rng([seed, i, j, year])
            n = int(rng.integers(300, 381))
            n_cases = int(np.clip(rng.binomial(n, prevalence[i - 1]), 2, n - 2))
            n_controls = n - n_cases
            q = float(prevalence[j - 1])
            t = sim.sample_table(log_or, n_cases, n_controls / n_cases, q, rng)
            records.append(PairTableRecord(year, i, j, int(t.n11), int(t.n12), int(t.n21), int(t.n22)))
    return records


def bundled_dataset_path() -> Path:
    return Path(__file__).with_name("data") / "synthetic_pairs.csv"


def load_bundled_dataset() -> list:
    return load_pair_tables(bundled_dataset_path())
