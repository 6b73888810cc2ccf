"""Command-line entry point.

Exit status is 0 on success, 2 when the input fails validation and 3 when a
numerical step fails (for ``pipeline``, when at least one pair failed; the
partial report is still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__, bayes, pipeline, sim
from . import effect_core as ec
from .errors import (
    AllZeroLikelihood,
    GammaPrimeError,
    NoConvergence,
    ParseError,
    SeparationDetected,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3

NUMERIC_ERRORS = (AllZeroLikelihood, SeparationDetected, NoConvergence, FloatingPointError, ArithmeticError)


def _table_arg(text):
    parts = text.replace(" ", "").split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected four comma-separated counts n11,n12,n21,n22")
    try:
        cells = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number in {text!r}") from None
    return ec.TwoByTwoTable(*cells)


def _level_arg(text):
    level = float(text)
    if not 0 < level < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return level


def _fmt(value):
    if isinstance(value, float):
        return "NA" if math.isnan(value) else bayes.format_float(value)
    return str(value)


def _write(text, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_analyze(args):
    est = ec.analyze_table(args.table, correct=args.correct)
    data = est.to_dict()
    if args.format == "json":
        _write(json.dumps(data, indent=2) + "\n", None)
    else:
        width = max(len(k) for k in data)
        lines = [f"{k.ljust(width)}  {_fmt(v) if not isinstance(v, (list, tuple)) else ' '.join(_fmt(c) for c in v)}"
                 for k, v in data.items()]
        _write("\n".join(lines) + "\n", None)
    return EXIT_OK


def cmd_simulate(args):
    configs = sim.load_config(args.config, seed=args.seed)
    reports = [sim.run_config(c, workers=args.workers, n_datasets=args.n_datasets) for c in configs]
    text = sim.reports_to_json(reports) + "\n" if args.format == "json" else sim.reports_to_csv(reports)
    _write(text, args.out)
    return EXIT_OK


def _load_prior(name):
    if name == "builtin":
        return bayes.build_mixture_prior()
    return bayes.load_prior(name)


def cmd_bayes(args):
    prior = _load_prior(args.prior)
    table = ec.haldane_correct(args.table) if args.correct else args.table
    post = bayes.to_gamma_prime(bayes.table_posterior(prior, table, args.density))
    s = bayes.summarize_posterior(post, args.level)
    lines = [
        f"posterior_mean_gamma_prime  {_fmt(s.mean)}",
        f"hpd_low                     {_fmt(s.hpd[0])}",
        f"hpd_high                    {_fmt(s.hpd[1])}",
        f"equal_tail_low              {_fmt(s.equal_tail[0])}",
        f"equal_tail_high             {_fmt(s.equal_tail[1])}",
        f"level                       {_fmt(args.level)}",
    ]
    _write("\n".join(lines) + "\n", None)
    if args.posterior_out:
        bayes.save_distribution(post, args.posterior_out)
    return EXIT_OK


def _exclusions(arg):
    if arg == "default":
        return pipeline.exclusion_set()
    if arg == "none":
        return pipeline.exclusion_set(default=False)
    return pipeline.load_exclusions(arg)


def cmd_pipeline(args):
    if args.input == "bundled":
        records = pipeline.load_bundled_dataset()
    else:
        records = pipeline.load_pair_tables(args.input)
    summaries = pipeline.run_pipeline(
        records, level=args.level, exclusions=_exclusions(args.exclusions), n_bins=args.bins, workers=args.workers
    )
    _write(pipeline.emit_report(summaries, args.format), args.out)
    failed = [s for s in summaries if s.failed]
    for s in failed:
        print(f"pair ({s.item_i}, {s.item_j}): {'; '.join(s.flags)}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_synth(args):
    records = pipeline.generate_synthetic_pairs(seed=args.seed)
    _write(pipeline.dumps_pair_tables(records), args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gammaprime", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="effect size and both Wald tests for one 2x2 table")
    p.add_argument("--table", type=_table_arg, required=True, metavar="n11,n12,n21,n22")
    p.add_argument("--correct", action="store_true", help="add 1/2 to every cell first")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run a Monte Carlo study from a key=value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the seed in the config")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--n-datasets", type=int, default=100, help="datasets per logistic config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bayes", help="posterior of gamma' for one table")
    p.add_argument("--prior", default="builtin", help="prior CSV file or 'builtin'")
    p.add_argument("--table", type=_table_arg, required=True, metavar="n11,n12,n21,n22")
    p.add_argument("--level", type=_level_arg, default=0.95)
    p.add_argument("--correct", action="store_true")
    p.add_argument("--density", choices=("normal", "chisq1"), default="normal")
    p.add_argument("--posterior-out", default=None, help="also write the posterior distribution as CSV")
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("pipeline", help="chain yearly tables per item pair and report")
    p.add_argument("--input", required=True, help="pair-table CSV or 'bundled'")
    p.add_argument("--level", type=_level_arg, default=0.95)
    p.add_argument("--format", choices=("matrix_text", "csv", "json"), default="matrix_text")
    p.add_argument("--exclusions", default="default", help="default, none, or a file of i,j lines")
    p.add_argument("--bins", type=int, default=1001)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", help="write the synthetic pair-table dataset")
    p.add_argument("--seed", type=int, default=pipeline.SYNTHETIC_SEED)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which matches EXIT_INVALID
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GammaPrimeError, ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
