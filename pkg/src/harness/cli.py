# src/harness/cli.py
"""`stretchlat` command line."""

import argparse
import logging
import sys

import numpy as np

from src import __version__
from src.core.count import CountRequest, LatticeSet, count, count_bruteforce
from src.core.domain import BodySpec
from src.core.errors import StretchLatError
from src.core.exponents import SamplingConfig, Strategy, exponent_report, multitype_at
from src.core.measure import StretchFactor, balanced_factor, section_measures
from src.core.settings import load_settings
from src.core.stretchopt import OptimizeConfig, optimize
from src.harness.config_file import run_config
from src.harness.experiments import (ExperimentConfig, ExperimentKind, format_value, log_grid,
                                     rate_experiment, remainder_experiment, write_fit_csv,
                                     write_rows)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _decimals(values):
    return ",".join(format_value(v) for v in values)


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _t_grid(args):
    if args.t_log:
        lo, hi, n = args.t_log
        return log_grid(lo, hi, int(n))
    return args.t_grid


def _stretch(args, body):
    return StretchFactor(args.stretch) if args.stretch else StretchFactor.identity(body.d)


# Subcommands

def cmd_count(args, settings):
    body = BodySpec.parse(args.body)
    stretch = _stretch(args, body)
    req = CountRequest(body, stretch, args.t, args.set)
    result = count_bruteforce(req) if args.oracle else count(req, n_jobs=settings['threads'])
    print(result.count)
    if args.csv:
        write_rows(args.csv, ['family', 'd', 'p', 'b', 'a', 't', 'set', 'count'],
                   [[body.family.value, body.d, _decimals(body.p), _decimals(body.b),
                     _decimals(stretch.diag), args.t, req.lattice_set.value, result.count]])
    return 0


def cmd_sections(args, settings):
    body = BodySpec.parse(args.body)
    measures = section_measures(body)
    B = balanced_factor(body, measures.sections)
    print(f"volume={format_value(measures.volume)}")
    print(f"sections={_decimals(measures.sections)}")
    print(f"balanced={_decimals(B.diag)}")
    if args.csv:
        header = ['volume'] + [f"section{j + 1}" for j in range(body.d)] + [f"b{j + 1}" for j in range(body.d)]
        write_rows(args.csv, header, [[measures.volume, *measures.sections, *B.diag]])
    return 0


def cmd_exponents(args, settings):
    body = BodySpec.parse(args.body)
    strategies = [Strategy.ANALYTIC, Strategy.NUMERIC] if args.strategy == "both" else [Strategy(args.strategy)]
    samples = args.samples if args.samples is not None else settings['exponent_samples']
    report = exponent_report(body, SamplingConfig(samples=samples, strategy=strategies[0],
                                                  n_jobs=settings['threads']))

    status = 0
    table = []
    print("point | multitype | nu | nu2" + (" | numeric" if len(strategies) == 2 else ""))
    for entry in report.canonical:
        coords = _decimals(np.round(entry.point.coordinates, 12))
        line = f"{coords} | {entry.multitype} | {entry.nu} | {entry.nu2}"
        numeric = None
        if len(strategies) == 2:
            numeric = multitype_at(body, entry.point, Strategy.NUMERIC).multitype
            line += f" | {numeric}"
            if numeric != entry.multitype:
                logger.error("Analytic %s and numeric %s multitypes disagree at %s",
                             entry.multitype, numeric, coords)
                status = 1
        print(line)
        table.append([coords, " ".join(map(str, entry.multitype)), entry.nu, entry.nu2,
                      " ".join(map(str, numeric)) if numeric else ""])
    print(f"nu={report.nu_min} mu={report.mu} gamma={report.gamma} samples={report.sample_count}")
    if args.csv:
        write_rows(args.csv, ['point', 'multitype', 'nu', 'nu2', 'numeric'], table)
    return status


def _optimize_config(args, settings, mode=None):
    return OptimizeConfig(
        mode=mode or args.mode, strategy=args.strategy, box=args.box,
        grid_levels=args.levels if args.levels is not None else settings['grid_levels'],
        initial_step=args.step if args.step is not None else settings['grid_step'],
        budget=args.budget if args.budget is not None else settings['optimizer_budget'],
        n_jobs=settings['threads'])


def cmd_optimize(args, settings):
    body = BodySpec.parse(args.body)
    report = optimize(body, args.t, _optimize_config(args, settings))
    print(f"value={report.value} optima={len(report.optima)} deviation={format_value(report.sup_deviation)} "
          f"a_star_max={format_value(report.a_star_max)} touches_box={format_value(report.touches_box)}")
    for A in report.optima:
        print(_decimals(A.diag))
    if args.csv:
        header = ['t', 'mode'] + [f"a{i + 1}" for i in range(body.d)] + ['value', 'deviation']
        rows = [[args.t, report.mode.value, *A.diag, report.value, A.distance(report.balanced)]
                for A in report.optima]
        write_rows(args.csv, header, rows)
    return 0


def _print_fit(fit):
    for row in fit.rows:
        print(f"{format_value(row.t)} {format_value(row.statistic)}" + ("" if row.complete else " incomplete"))
    slope = "undefined" if fit.fit_error else format_value(fit.fitted_slope)
    print(f"slope={slope} exponent={fit.theoretical_exponent} constant={format_value(fit.constant)}")


def cmd_rate(args, settings):
    body = BodySpec.parse(args.body)
    kind = ExperimentKind.RATE_MAX if args.mode == "max-positive" else ExperimentKind.RATE_MIN
    cfg = ExperimentConfig(body=body, t_grid=_t_grid(args), kind=kind, name="rate",
                           optimize=_optimize_config(args, settings),
                           samples=settings['exponent_samples'], n_jobs=settings['threads'])
    fit = rate_experiment(cfg)
    _print_fit(fit)
    if args.csv:
        write_fit_csv(fit, args.csv)
    return 0


def cmd_remainder(args, settings):
    body = BodySpec.parse(args.body)
    kind = ExperimentKind(f"remainder-{LatticeSet.coerce(args.set).value}")
    cfg = ExperimentConfig(body=body, t_grid=_t_grid(args), kind=kind, name="remainder",
                           stretch=StretchFactor(args.stretch) if args.stretch else None,
                           window=args.window,
                           samples=settings['exponent_samples'], n_jobs=settings['threads'])
    fit = remainder_experiment(cfg)
    _print_fit(fit)
    if args.csv:
        write_fit_csv(fit, args.csv)
    return 0


def cmd_run(args, settings):
    return run_config(args.config, output_dir=args.output_dir, settings=settings,
                      n_jobs=settings['threads'])


# Parser

def _add_grid_arguments(parser):
    grid = parser.add_mutually_exclusive_group(required=True)
    grid.add_argument('--t-grid', type=_floats, help="comma separated dilations")
    grid.add_argument('--t-log', type=_floats, help="lo,hi,n log-spaced dilations")


def _add_optimizer_arguments(parser):
    parser.add_argument('--strategy', choices=['exact2d', 'grid'], default='exact2d')
    parser.add_argument('--levels', type=int, default=None)
    parser.add_argument('--step', type=float, default=None)
    parser.add_argument('--box', type=float, default=None)
    parser.add_argument('--budget', type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="stretchlat",
                                     description="Lattice points in optimally stretched convex bodies")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--threads', type=int, default=None, help="worker threads (default: all cores)")
    parser.add_argument('--csv', default=None, help="also write the result as CSV")
    parser.add_argument('--quiet', action='store_true', help="log warnings and errors only")
    parser.add_argument('--settings', default=None, help="JSON settings file")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('count', help="exact lattice point count")
    p.add_argument('--body', required=True)
    p.add_argument('--stretch', type=_floats, default=None)
    p.add_argument('--t', type=float, required=True)
    p.add_argument('--set', choices=[s.value for s in LatticeSet], default='full')
    p.add_argument('--oracle', action='store_true', help="brute force enumeration")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser('sections', help="volume, section measures and balanced factor")
    p.add_argument('--body', required=True)
    p.set_defaults(func=cmd_sections)

    p = sub.add_parser('exponents', help="multitype table and nu, mu, gamma")
    p.add_argument('--body', required=True)
    p.add_argument('--samples', type=int, default=None)
    p.add_argument('--strategy', choices=['analytic', 'numeric', 'both'], default='analytic')
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser('optimize', help="optimal stretches at one dilation")
    p.add_argument('--body', required=True)
    p.add_argument('--t', type=float, required=True)
    p.add_argument('--mode', choices=['max-positive', 'min-nonnegative'], default='max-positive')
    _add_optimizer_arguments(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser('rate', help="deviation of optimal stretches from B along a t grid")
    p.add_argument('--body', required=True)
    p.add_argument('--mode', choices=['max-positive', 'min-nonnegative'], default='max-positive')
    _add_grid_arguments(p)
    _add_optimizer_arguments(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser('remainder', help="count remainders along a t grid")
    p.add_argument('--body', required=True)
    p.add_argument('--set', choices=[s.value for s in LatticeSet], default='full')
    p.add_argument('--stretch', type=_floats, default=None, help="default: balanced factor")
    p.add_argument('--window', type=int, default=1, help="sub-samples per row, the largest |R| is kept")
    _add_grid_arguments(p)
    p.set_defaults(func=cmd_remainder)

    p = sub.add_parser('run', help="run every experiment of a config file")
    p.add_argument('config')
    p.add_argument('--output-dir', default="results")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format=LOG_FORMAT)

    settings = load_settings(args.settings)
    if args.threads is not None:
        settings['threads'] = max(1, args.threads)

    try:
        return args.func(args, settings)
    except StretchLatError as e:
        print(f"stretchlat: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
