# src/core/stretchopt.py
"""Optimal volume preserving diagonal stretches.

The objective a -> #(N^d in t*A*Omega) is integer valued and piecewise
constant, so the search is combinatorial: Exact2D sweeps the critical
values where a lattice point crosses the boundary, Grid refines a
log-space lattice around every cell that can still hold an optimum.
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from src.core.count import CountRequest, LatticeSet, count
from src.core.domain import Family
from src.core.errors import CapacityError, ConfigurationError, InputError, PartialResultError
from src.core.measure import StretchFactor, balanced_factor, section_measure

logger = logging.getLogger(__name__)

CRITICAL_VALUE_CAP = 50_000_000
DEDUPE_TOLERANCE = 1e-13
TANGENCY_SLACK = 1e-12
SWEEP_SLACK = 2          # sweep values this close to the best are re-counted exactly
GRID_SLACK = 2           # grid points this close to the best are refined when d >= 3
BISECTION_STEPS = 100
GOLDEN_STEPS = 120
POINTS_PER_CHUNK = 1 << 20
BOX_EDGE_RTOL = 1e-9


class Mode(enum.Enum):
    MAX_POSITIVE = "max-positive"
    MIN_NONNEGATIVE = "min-nonnegative"

    @property
    def lattice_set(self):
        return LatticeSet.POSITIVE if self is Mode.MAX_POSITIVE else LatticeSet.NONNEGATIVE

    def key(self, value):
        """Larger is better"""
        return value if self is Mode.MAX_POSITIVE else -value


class SearchStrategy(enum.Enum):
    EXACT_2D = "exact2d"
    GRID = "grid"


@dataclass(frozen=True)
class OptimizeConfig:
    mode: Mode = Mode.MAX_POSITIVE
    strategy: SearchStrategy = SearchStrategy.EXACT_2D
    box: float = None             # None: 4 d (prod |Omega_j|)^(1/d) / min |Omega_j|
    grid_levels: int = 10
    initial_step: float = 0.05
    budget: int = 200_000
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'mode', Mode(self.mode))
        object.__setattr__(self, 'strategy', SearchStrategy(self.strategy))
        if self.box is not None and not self.box > 1:
            raise ConfigurationError(f"box bound must exceed 1, got {self.box}")
        if self.grid_levels < 0 or not self.initial_step > 0 or self.budget < 1:
            raise ConfigurationError("grid levels, initial step and budget must be positive")


@dataclass(frozen=True)
class OptimumReport:
    value: int
    optima: tuple
    sup_deviation: float
    a_star_max: float
    evaluations: int
    touches_box: bool = False
    t: float = None
    box: float = None
    mode: Mode = Mode.MAX_POSITIVE
    balanced: StretchFactor = field(default=None, repr=False)


def default_box(body):
    sections = np.array([section_measure(body, j) for j in range(body.d)])
    geometric_mean = math.exp(np.log(sections).mean())
    return 4.0 * body.d * geometric_mean / sections.min()


def deviation_from_balanced(report, B):
    """sup over reported optima of max_j |a_j - B_jj|"""
    if not report.optima:
        return 0.0
    return max(A.distance(B) for A in report.optima)


def optimize(body, t, cfg=None):
    """All optimal stretches found by the configured strategy"""
    cfg = cfg or OptimizeConfig()
    t = float(t)
    if not (t > 0 and math.isfinite(t)):
        raise InputError(f"dilation must be positive and finite, got {t}")
    K = cfg.box if cfg.box is not None else default_box(body)
    if K <= 1:
        raise ConfigurationError(f"box bound {K} leaves no room to stretch")
    if t * body.containment_constant < 1:
        raise ConfigurationError(f"t={t} is below 1/C={1 / body.containment_constant:.6g}; "
                                 "no stretch in the box satisfies t/a_* >= 1/C")
    B = balanced_factor(body)

    if cfg.strategy is SearchStrategy.EXACT_2D:
        if body.d != 2:
            raise ConfigurationError("exact2d search needs d = 2, use grid")
        search = _Exact2DSearch(body, t, K, cfg, B)
    else:
        search = _GridSearch(body, t, K, cfg, B)
    report = search.run()
    if report.touches_box:
        logger.warning("An optimum at t=%g touches the search box K=%g", t, K)
    logger.info("t=%g %s: value %d, %d optima, deviation %.3g", t, cfg.mode.value,
                report.value, len(report.optima), report.sup_deviation)
    return report


def _report(value, optima, evaluations, t, K, cfg, B):
    optima = tuple(optima)
    log_K = math.log(K)
    touches = any(np.any(np.abs(np.log(A.as_array())) >= log_K * (1 - BOX_EDGE_RTOL)) for A in optima)
    report = OptimumReport(value=int(value), optima=optima, sup_deviation=0.0,
                           a_star_max=max((A.a_star for A in optima), default=0.0),
                           evaluations=evaluations, touches_box=bool(touches), t=t, box=K,
                           mode=cfg.mode, balanced=B)
    return _with_deviation(report, B)


def _with_deviation(report, B):
    return replace(report, sup_deviation=deviation_from_balanced(report, B))


class _Counter:
    """Fresh exact counts with a shared evaluation budget"""

    def __init__(self, body, t, cfg):
        self.body = body
        self.t = t
        self.cfg = cfg
        self.evaluations = 0

    def __call__(self, stretch):
        req = CountRequest(self.body, stretch, self.t, self.cfg.mode.lattice_set)
        return count(req).count

    def many(self, stretches):
        self.evaluations += len(stretches)
        return Parallel(n_jobs=self.cfg.n_jobs, backend="threading")(
            delayed(self)(A) for A in stretches)

    def at(self, t, stretch):
        req = CountRequest(self.body, stretch, t, self.cfg.mode.lattice_set)
        return count(req).count

    def many_at(self, corners):
        """Counts for (dilation, stretch) pairs"""
        self.evaluations += len(corners)
        return Parallel(n_jobs=self.cfg.n_jobs, backend="threading")(
            delayed(self.at)(t, A) for t, A in corners)


# Exact sweep in two dimensions

def critical_values_2d(body, t, K, limit=CRITICAL_VALUE_CAP):
    """Sorted a in [1/K, K] where some k in N_0^2 lies on the boundary of t*diag(a, 1/a)*Omega"""
    if body.d != 2:
        raise InputError("critical values are defined for d = 2")
    if K <= 1:
        return []
    lo, hi = _point_intervals(body, float(t), float(K), lower=0)
    s = _critical_logs(lo, hi, math.log(K), limit)
    values = np.exp(s)
    if len(values) > 1:
        values = values[np.concatenate([[True], np.diff(values) > DEDUPE_TOLERANCE])]
    return values.tolist()


def _critical_logs(lo, hi, log_K, limit=CRITICAL_VALUE_CAP):
    ends = np.concatenate([lo, hi])
    ends = ends[np.isfinite(ends) & (np.abs(ends) <= log_K)]
    ends = np.unique(ends)
    if len(ends) > 1:
        ends = ends[np.concatenate([[True], np.diff(ends) > DEDUPE_TOLERANCE])]
    if limit is not None and len(ends) > limit:
        raise CapacityError(f"{len(ends)} critical values exceed the limit {limit}")
    return ends


def _point_intervals(body, t, K, lower):
    """Closed intervals in s = log a on which k lies in t*diag(a, 1/a)*Omega, for k >= lower"""
    log_K = math.log(K)
    n1 = int(math.floor(t * K * body.b[0]))
    n2 = int(math.floor(t * K * body.b[1]))
    k2 = np.arange(lower, n2 + 1, dtype=float)
    rows = max(1, POINTS_PER_CHUNK // max(len(k2), 1))

    lo_parts, hi_parts = [], []
    for start in range(lower, n1 + 1, rows):
        k1 = np.arange(start, min(start + rows, n1 + 1), dtype=float)
        K1, K2 = (g.ravel() for g in np.meshgrid(k1, k2, indexing='ij'))
        if body.family is Family.SUPERELLIPSOID:
            lo, hi, ok = _superellipsoid_intervals(body, t, K1, K2)
        else:
            lo, hi, ok = _gauge_intervals(body, t, log_K, K1, K2)
        keep = ok & (lo <= log_K) & (hi >= -log_K)
        lo_parts.append(lo[keep])
        hi_parts.append(hi[keep])
    if not lo_parts:
        return np.empty(0), np.empty(0)
    return np.concatenate(lo_parts), np.concatenate(hi_parts)


def _superellipsoid_intervals(body, t, k1, k2):
    # f(s) = alpha e^(-p1 s) + beta e^(p2 s) <= 1
    p1, p2 = body.p
    alpha = (k1 / (t * body.b[0])) ** p1
    beta = (k2 / (t * body.b[1])) ** p2
    lo = np.full(len(k1), -np.inf)
    hi = np.full(len(k1), np.inf)
    ok = np.ones(len(k1), dtype=bool)

    with np.errstate(divide='ignore'):
        log_alpha = np.log(alpha)
        log_beta = np.log(beta)

    only_first = (alpha > 0) & (beta == 0)
    lo[only_first] = log_alpha[only_first] / p1
    only_second = (alpha == 0) & (beta > 0)
    hi[only_second] = -log_beta[only_second] / p2

    both = np.flatnonzero((alpha > 0) & (beta > 0))
    if not len(both):
        return lo, hi, ok
    a, b_, la, lb = alpha[both], beta[both], log_alpha[both], log_beta[both]
    f = lambda s: a * np.exp(-p1 * s) + b_ * np.exp(p2 * s)

    s_star = (math.log(p1) + la - math.log(p2) - lb) / (p1 + p2)
    f_min = f(s_star)
    ok[both] = f_min <= 1.0 + TANGENCY_SLACK
    tangent = f_min > 1.0

    with np.errstate(over='ignore'):
        left = _bisect(f, la / p1, s_star, inside_right=True)
        right = _bisect(f, s_star, -lb / p2, inside_right=False)
    lo[both] = np.where(tangent, s_star, left)
    hi[both] = np.where(tangent, s_star, right)
    return lo, hi, ok


def _gauge_intervals(body, t, log_K, k1, k2):
    def g(s, idx=slice(None)):
        return np.asarray(body.gauge_oracle(np.stack([k1[idx] * np.exp(-s), k2[idx] * np.exp(s)],
                                                     axis=-1)), dtype=float)

    # golden section for the minimum of the unimodal s -> g(s)
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a = np.full(len(k1), -log_K)
    b = np.full(len(k1), log_K)
    for _ in range(GOLDEN_STEPS):
        c = b - ratio * (b - a)
        d = a + ratio * (b - a)
        smaller = g(c) <= g(d)
        b = np.where(smaller, d, b)
        a = np.where(smaller, a, c)
    s_star = 0.5 * (a + b)
    ok = g(s_star) <= t

    f = lambda s, idx: g(s, idx) / t
    lo = np.full(len(k1), -np.inf)
    hi = np.full(len(k1), np.inf)
    left = np.flatnonzero(ok & (g(np.full(len(k1), -log_K)) > t))
    right = np.flatnonzero(ok & (g(np.full(len(k1), log_K)) > t))
    if len(left):
        lo[left] = _bisect(lambda s: f(s, left), np.full(len(left), -log_K), s_star[left], inside_right=True)
    if len(right):
        hi[right] = _bisect(lambda s: f(s, right), s_star[right], np.full(len(right), log_K),
                            inside_right=False)
    return lo, hi, ok


def _bisect(f, left, right, inside_right):
    """Boundary of {f <= 1} between left and right, returned on the inside"""
    left = np.array(left, dtype=float)
    right = np.array(right, dtype=float)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (left + right)
        inside = f(mid) <= 1.0
        if inside_right:
            right = np.where(inside, mid, right)
            left = np.where(inside, left, mid)
        else:
            left = np.where(inside, mid, left)
            right = np.where(inside, right, mid)
    return right if inside_right else left


class _Exact2DSearch:
    def __init__(self, body, t, K, cfg, B):
        self.body, self.t, self.K, self.cfg, self.B = body, t, K, cfg, B
        self.counter = _Counter(body, t, cfg)

    def run(self):
        cfg = self.cfg
        log_K = math.log(self.K)
        lower = 1 if cfg.mode is Mode.MAX_POSITIVE else 0
        lo, hi = _point_intervals(self.body, self.t, self.K, lower)
        critical = _critical_logs(lo, hi, log_K)
        logger.debug("exact2d t=%g: %d lattice points, %d critical values", self.t, len(lo), len(critical))

        anchors = np.array([-log_K, log_K, 0.0, math.log(self.B.diag[0])])
        midpoints = 0.5 * (critical[:-1] + critical[1:])
        candidates = np.unique(np.concatenate([critical, midpoints, anchors]))

        # count(s) = #{lo <= s} - #{hi < s}
        lo_sorted, hi_sorted = np.sort(lo), np.sort(hi)
        swept = (np.searchsorted(lo_sorted, candidates, side='right')
                 - np.searchsorted(hi_sorted, candidates, side='left'))
        keys = cfg.mode.key(swept)
        best = keys.max()

        # identity and B are always re-counted
        chosen = (keys >= best - SWEEP_SLACK) | np.isin(candidates, anchors[2:])
        order = np.lexsort((candidates[chosen], -keys[chosen]))
        shortlist = candidates[chosen][order]
        exhausted = len(shortlist) > cfg.budget
        if exhausted:
            shortlist = shortlist[:cfg.budget]

        stretches = [StretchFactor.from_log([s]) for s in shortlist]
        values = self.counter.many(stretches)
        value_keys = [cfg.mode.key(v) for v in values]
        top = max(value_keys)
        optima = sorted((A for A, k in zip(stretches, value_keys) if k == top), key=lambda A: A.diag[0])
        value = cfg.mode.key(top)
        report = _report(value, optima, self.counter.evaluations, self.t, self.K, cfg, self.B)
        if exhausted:
            raise PartialResultError(f"exact2d needs {int(chosen.sum())} counts, budget is {cfg.budget}",
                                     report)
        return report


class _GridSearch:
    """Multi-level search over s = (log a_1, ..., log a_(d-1)) with a_d = exp(-sum s).

    Each grid point stands for the cell of half width h/2 around it. In the
    plane a cell is refined while the count at its outer corner (inner
    corner when minimizing) can still reach the best value, and cells that
    could still beat it after the last level are settled on the critical
    values inside them. For d >= 3 every point within GRID_SLACK of the best
    is refined.
    """

    def __init__(self, body, t, K, cfg, B):
        self.body, self.t, self.K, self.cfg, self.B = body, t, K, cfg, B
        self.counter = _Counter(body, t, cfg)
        self.log_K = math.log(K)
        self.center = B.log_coordinates()
        self.values = {}
        self.points = {}

    def _in_box(self, s):
        return np.all(np.abs(s) <= self.log_K + 1e-12) and abs(s.sum()) <= self.log_K + 1e-12

    def _key(self, s):
        return tuple(np.round(s, 14))

    def _spend(self, n):
        if self.counter.evaluations + n > self.cfg.budget:
            raise PartialResultError(
                f"grid search budget {self.cfg.budget} exhausted after {self.counter.evaluations} counts",
                self._best_report())

    def _evaluate(self, points):
        """Count the new points in the box; returns the distinct points in the box"""
        kept, fresh = {}, []
        for s in points:
            s = np.asarray(s, dtype=float)
            if self.body.d == 2:
                s = np.clip(s, -self.log_K, self.log_K)
            key = self._key(s)
            if key in kept or not self._in_box(s):
                continue
            kept[key] = s
            if key not in self.values:
                fresh.append(s)
        self._spend(len(fresh))
        results = self.counter.many([StretchFactor.from_log(s) for s in fresh])
        for s, value in zip(fresh, results):
            self.values[self._key(s)] = value
            self.points[self._key(s)] = s
        return list(kept.values())

    def _level_zero(self):
        h = self.cfg.initial_step
        axes = []
        for c in self.center:
            below = np.arange(c, -self.log_K - 1e-12, -h)
            above = np.arange(c + h, self.log_K + 1e-12, h)
            axes.append(np.unique(np.concatenate([below, above, [-self.log_K, self.log_K]])))
        points = [np.array(s) for s in itertools.product(*axes)]
        points.append(np.zeros(self.body.d - 1))
        return points

    def _corner(self, s, r):
        """Dilation and stretch of the cell corner whose body contains (or sits inside) every cell body"""
        d = self.body.d
        sign = 1.0 if self.cfg.mode is Mode.MAX_POSITIVE else -1.0
        logs = np.append(s, -s.sum()) + sign * r * np.append(np.ones(d - 1), d - 1)
        shift = logs.mean()
        return self.t * math.exp(shift), StretchFactor(tuple(np.exp(logs - shift)))

    def _bounds(self, cells, r):
        self._spend(len(cells))
        corners = [self._corner(s, r) for s in cells]
        return self.counter.many_at(corners)

    def _best(self):
        keys = {k: self.cfg.mode.key(v) for k, v in self.values.items()}
        top = max(keys.values())
        return self.cfg.mode.key(top), sorted(k for k, v in keys.items() if v == top)

    def _best_report(self):
        if not self.values:
            return None
        value, optima = self._best()
        return _report(value, [StretchFactor.from_log(self.points[k]) for k in optima],
                       self.counter.evaluations, self.t, self.K, self.cfg, self.B)

    def _open_cells(self, cells, h, strict=False):
        """Cells that may hold a value at least as good as the best, or strictly better"""
        best_key = self.cfg.mode.key(self._best()[0])
        if self.body.d > 2:
            return [s for s in cells if self.cfg.mode.key(self.values[self._key(s)]) >= best_key - GRID_SLACK]
        bounds = self._bounds(cells, h / 2)
        keys = [self.cfg.mode.key(v) for v in bounds]
        if strict:
            return [s for s, k in zip(cells, keys) if k > best_key]
        return [s for s, k in zip(cells, keys) if k >= best_key]

    def _settle(self, cells, h):
        """Evaluate every critical value inside the given plane cells, with the pieces between them"""
        lower = 1 if self.cfg.mode is Mode.MAX_POSITIVE else 0
        lo, hi = _point_intervals(self.body, self.t, self.K, lower)
        critical = _critical_logs(lo, hi, self.log_K)
        points = []
        for s in cells:
            left = max(s[0] - h / 2, -self.log_K)
            right = min(s[0] + h / 2, self.log_K)
            inside = critical[(critical >= left) & (critical <= right)]
            stops = np.concatenate([[left], inside, [right]])
            candidates = np.concatenate([stops, 0.5 * (stops[:-1] + stops[1:])])
            points.extend(np.array([v]) for v in candidates)
        logger.debug("grid settles %d cells on %d candidates", len(cells), len(points))
        self._evaluate(points)

    def run(self):
        level_zero = self._level_zero()
        if len(level_zero) > self.cfg.budget:
            raise ConfigurationError(f"level 0 grid has {len(level_zero)} points, budget is {self.cfg.budget}")
        cells = self._evaluate(level_zero)

        h = self.cfg.initial_step
        offsets = np.array(list(itertools.product((-1, 0, 1), repeat=self.body.d - 1)), dtype=float)
        for level in range(1, self.cfg.grid_levels + 1):
            parents = self._open_cells(cells, h)
            h /= 2
            cells = self._evaluate(np.array(s) + h * o for s in parents for o in offsets)
            logger.debug("grid level %d: step %.3g, %d open cells, %d counts", level, h, len(parents),
                         self.counter.evaluations)

        if self.body.d == 2:
            unsettled = self._open_cells(cells, h, strict=True)
            if unsettled:
                self._settle(unsettled, h)
        return self._best_report()
