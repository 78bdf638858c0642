# src/harness/experiments.py
"""Rate, remainder and gap experiments over a grid of dilations."""

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from src.core.count import CountRequest, LatticeSet, count
from src.core.domain import Family
from src.core.errors import ConfigurationError, InputError, PartialResultError
from src.core.exponents import SamplingConfig, Strategy, exponent_report
from src.core.measure import balanced_factor, section_measure, volume
from src.core.stretchopt import Mode, OptimizeConfig, optimize

logger = logging.getLogger(__name__)

MIN_FIT_ROWS = 4
WINDOW_SPAN = 0.1       # remainder sub-samples cover [t, (1 + WINDOW_SPAN) t]


class ExperimentKind(enum.Enum):
    RATE_MAX = "rate-max"
    RATE_MIN = "rate-min"
    REMAINDER_FULL = "remainder-full"
    REMAINDER_POSITIVE = "remainder-positive"
    REMAINDER_NONNEGATIVE = "remainder-nonnegative"
    REMAINDER_SECTIONS_UNION = "remainder-sections-union"
    GAP = "gap"

    @property
    def is_rate(self):
        return self in (ExperimentKind.RATE_MAX, ExperimentKind.RATE_MIN)

    @property
    def is_remainder(self):
        return self.value.startswith("remainder-")

    @property
    def lattice_set(self):
        return LatticeSet(self.value[len("remainder-"):])

    @property
    def statistic_name(self):
        if self.is_rate:
            return "sup_deviation"
        return "remainder" if self.is_remainder else "min_gap"


@dataclass(frozen=True)
class ExperimentConfig:
    body: object
    t_grid: tuple
    kind: ExperimentKind
    name: str = "experiment"
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    stretch: object = None        # remainder and gap stretch, None means the balanced factor
    output: str = None
    samples: int = 10_000
    max_slope: float = None
    min_gap: float = None
    window: int = 1               # remainder sub-samples per row, the row keeps the largest |R|
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'kind', ExperimentKind(self.kind))
        grid = tuple(float(t) for t in self.t_grid)
        if not grid:
            raise ConfigurationError(f"experiment {self.name!r} has an empty t grid")
        if any(not (t > 0 and math.isfinite(t)) for t in grid):
            raise ConfigurationError(f"experiment {self.name!r}: t values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError(f"experiment {self.name!r}: t grid must be strictly ascending")
        object.__setattr__(self, 't_grid', grid)
        if self.stretch is not None and self.stretch.d != self.body.d:
            raise InputError(f"stretch has dimension {self.stretch.d}, body has {self.body.d}")
        if int(self.window) < 1:
            raise ConfigurationError(f"experiment {self.name!r}: window must be at least 1")
        object.__setattr__(self, 'window', int(self.window))


@dataclass(frozen=True)
class RateRow:
    t: float
    statistic: float
    values: dict = field(default_factory=dict)   # extra CSV columns in order
    complete: bool = True


@dataclass(frozen=True)
class RateFit:
    name: str
    kind: ExperimentKind
    rows: tuple
    fitted_slope: float
    theoretical_exponent: Fraction
    constant: float
    fit_error: str = None
    max_slope: float = None
    min_gap: float = None

    @property
    def minimum(self):
        return min((r.statistic for r in self.rows), default=math.nan)

    @property
    def a_star_max(self):
        values = [r.values.get('a_star_max') for r in self.rows]
        values = [v for v in values if v is not None]
        return max(values) if values else None

    @property
    def passed(self):
        """Acceptance in the bound direction"""
        if self.fit_error is not None or not all(r.complete for r in self.rows):
            return False
        if not math.isfinite(self.constant):
            return False
        if self.max_slope is not None and self.fitted_slope > self.max_slope:
            return False
        if self.min_gap is not None and not self.minimum > self.min_gap:
            return False
        return True


def log_grid(lo, hi, n):
    """n log-spaced dilations from lo to hi"""
    if not (0 < lo < hi) or int(n) < 2:
        raise ConfigurationError(f"log grid needs 0 < lo < hi and n >= 2, got {lo}, {hi}, {n}")
    return tuple(float(t) for t in np.geomspace(lo, hi, int(n)))


def fit_slope(t_values, statistics):
    """OLS slope of log statistic against log t; zeros skipped"""
    t_values = np.asarray(t_values, dtype=float)
    statistics = np.asarray(statistics, dtype=float)
    keep = statistics > 0
    if keep.sum() < MIN_FIT_ROWS:
        return math.nan, f"need at least {MIN_FIT_ROWS} nonzero rows for a fit, got {int(keep.sum())}"
    slope, _ = np.polyfit(np.log(t_values[keep]), np.log(statistics[keep]), 1)
    return float(slope), None


def scaled_constant(rows, exponent):
    """max over rows of statistic / t^exponent"""
    exponent = float(exponent)
    return max((r.statistic / r.t ** exponent for r in rows), default=math.nan)


def main_terms(body, stretch, t, lattice_set, measures=None):
    """Leading terms of the count in the expansion in t"""
    d = body.d
    vol, sections = measures or _measures(body)
    lattice_set = LatticeSet.coerce(lattice_set)
    if lattice_set is LatticeSet.FULL:
        return vol * t ** d
    edge = sum(s / a for s, a in zip(sections, stretch.diag)) * t ** (d - 1)
    if lattice_set is LatticeSet.SECTIONS_UNION:
        return edge
    sign = -1.0 if lattice_set is LatticeSet.POSITIVE else 1.0
    return 2.0 ** -d * (vol * t ** d + sign * edge)


def lemma_gap(body, stretch, t, measures=None):
    """Normalized gaps below 2^-d |Omega| t^d for N^d and above it for Z_+^d"""
    d = body.d
    vol, _ = measures or _measures(body)
    quarter = 2.0 ** -d * vol * t ** d
    scale = stretch.a_star * t ** (d - 1)
    positive = count(CountRequest(body, stretch, t, LatticeSet.POSITIVE)).count
    nonnegative = count(CountRequest(body, stretch, t, LatticeSet.NONNEGATIVE)).count
    return (quarter - positive) / scale, (nonnegative - quarter) / scale


def _measures(body):
    return volume(body), [section_measure(body, j) for j in range(body.d)]


def _exponents(cfg):
    strategy = Strategy.ANALYTIC if cfg.body.family is Family.SUPERELLIPSOID else Strategy.NUMERIC
    report = exponent_report(cfg.body, SamplingConfig(samples=cfg.samples, strategy=strategy,
                                                      n_jobs=cfg.n_jobs))
    return report


def _finish(cfg, rows, exponent):
    rows = tuple(rows)
    complete = [r for r in rows if r.complete]
    slope, error = fit_slope([r.t for r in complete], [r.statistic for r in complete])
    if error:
        logger.warning("%s: %s", cfg.name, error)
    fit = RateFit(name=cfg.name, kind=cfg.kind, rows=rows, fitted_slope=slope,
                  theoretical_exponent=Fraction(exponent), constant=scaled_constant(rows, exponent),
                  fit_error=error, max_slope=cfg.max_slope, min_gap=cfg.min_gap)
    logger.info("%s: slope %.4g vs exponent %.4g, constant %.4g", cfg.name, slope,
                float(exponent), fit.constant)
    return fit


# Experiments

def rate_experiment(cfg):
    """Sup deviation of the optimal stretches from B along the t grid"""
    if not cfg.kind.is_rate:
        raise ConfigurationError(f"{cfg.kind.value} is not a rate experiment")
    mode = Mode.MAX_POSITIVE if cfg.kind is ExperimentKind.RATE_MAX else Mode.MIN_NONNEGATIVE
    opt = replace(cfg.optimize, mode=mode)
    gamma = _exponents(cfg).gamma
    d = cfg.body.d

    def row(t):
        complete = True
        try:
            report = optimize(cfg.body, t, opt)
        except PartialResultError as e:
            logger.warning("%s: t=%g incomplete: %s", cfg.name, t, e)
            report, complete = e.best, False
        if report is None:
            values = {'value': None, **{f"a{i + 1}": None for i in range(d)},
                      'a_star_max': None, 'touches_box': None}
            return RateRow(t, math.nan, values, complete=False)
        first = report.optima[0].diag if report.optima else (None,) * d
        values = {'value': report.value, **{f"a{i + 1}": a for i, a in enumerate(first)},
                  'a_star_max': report.a_star_max, 'touches_box': report.touches_box}
        return RateRow(t, report.sup_deviation, values, complete)

    rows = Parallel(n_jobs=cfg.n_jobs, backend="threading")(delayed(row)(t) for t in cfg.t_grid)
    return _finish(cfg, rows, -gamma)


def remainder_experiment(cfg):
    """|exact count - main terms| along the t grid"""
    if not cfg.kind.is_remainder:
        raise ConfigurationError(f"{cfg.kind.value} is not a remainder experiment")
    body = cfg.body
    d = body.d
    stretch = cfg.stretch or balanced_factor(body)
    measures = _measures(body)
    lattice_set = cfg.kind.lattice_set

    report = _exponents(cfg)
    mu = report.mu
    exponent = d - 1 - min(report.nu_min, mu / (d - mu))

    def remainder(s):
        exact = count(CountRequest(body, stretch, s, lattice_set)).count
        return exact, main_terms(body, stretch, s, lattice_set, measures)

    def row(t):
        exact, main = remainder(t)
        values = {'count': exact, 'main_term': main}
        if cfg.window == 1:
            return RateRow(t, abs(exact - main), values)
        worst_t, worst = t, abs(exact - main)
        for k in range(1, cfg.window):
            s = t * (1.0 + WINDOW_SPAN * k / cfg.window)
            other, other_main = remainder(s)
            if abs(other - other_main) > worst:
                worst_t, worst = s, abs(other - other_main)
        return RateRow(t, worst, {**values, 'worst_t': worst_t})

    rows = Parallel(n_jobs=cfg.n_jobs, backend="threading")(delayed(row)(t) for t in cfg.t_grid)
    return _finish(cfg, rows, exponent)


def gap_experiment(cfg):
    """Minimum of both normalized gaps along the t grid"""
    if cfg.kind is not ExperimentKind.GAP:
        raise ConfigurationError(f"{cfg.kind.value} is not a gap experiment")
    stretch = cfg.stretch or balanced_factor(cfg.body)
    measures = _measures(cfg.body)

    def row(t):
        lower, upper = lemma_gap(cfg.body, stretch, t, measures)
        return RateRow(t, min(lower, upper), {'lower_gap': lower, 'upper_gap': upper})

    rows = Parallel(n_jobs=cfg.n_jobs, backend="threading")(delayed(row)(t) for t in cfg.t_grid)
    return _finish(cfg, rows, 0)


def run_experiment(cfg):
    if cfg.kind.is_rate:
        return rate_experiment(cfg)
    if cfg.kind.is_remainder:
        return remainder_experiment(cfg)
    return gap_experiment(cfg)


# CSV output

def format_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), '.17g')


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) if not isinstance(v, str) else v for v in row])
    logger.debug("Wrote %d rows to %s", len(rows), path)


def write_fit_csv(fit, path):
    """One line per t: t, the statistic, the kind's extra columns and the completeness flag"""
    extra = list(fit.rows[0].values) if fit.rows else []
    header = ['t', fit.kind.statistic_name] + extra + ['complete']
    rows = [[r.t, r.statistic] + [r.values.get(k) for k in extra] + [r.complete] for r in fit.rows]
    write_rows(path, header, rows)


SUMMARY_HEADER = ['name', 'kind', 'rows', 'fitted_slope', 'theoretical_exponent', 'constant',
                  'minimum', 'a_star_max', 'max_slope', 'min_gap', 'status', 'message']


def summary_row(fit=None, name=None, kind=None, error=None):
    if fit is None:
        return [name, kind, 0, None, None, None, None, None, None, None, "error", str(error)]
    status = "pass" if fit.passed else "fail"
    return [fit.name, fit.kind.value, len(fit.rows), fit.fitted_slope, fit.theoretical_exponent,
            fit.constant, fit.minimum, fit.a_star_max, fit.max_slope, fit.min_gap, status,
            fit.fit_error or ""]
