# src/core/count.py
"""Exact lattice point counts in t*A*Omega.

Counting walks integer prefixes (k_1, ..., k_m) of the nonnegative orthant
and, for each prefix, finds the last admissible index n of the next axis.
The float slice width gives a first guess for n; the membership predicate
then moves n by single steps until (prefix, n) is inside and (prefix, n+1)
is not. The symmetric count over Z^d weights each nonnegative prefix by
2^(number of nonzero entries).
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from src.core.domain import EXACT_BAND, Family, membership
from src.core.errors import CapacityError, InputError

logger = logging.getLogger(__name__)

INDEX_CAPACITY = 2 ** 62
BRUTEFORCE_CAP = 10 ** 8
BRUTEFORCE_CHUNK = 1 << 20
WIDTH_BISECTION_STEPS = 64


class LatticeSet(enum.Enum):
    FULL = "full"                      # Z^d
    POSITIVE = "positive"              # N^d, all coordinates >= 1
    NONNEGATIVE = "nonnegative"        # Z_+^d, all coordinates >= 0
    SECTIONS_UNION = "sections-union"  # Z^d points with some zero coordinate

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise InputError(f"unknown lattice set {value!r}, expected one of {names}") from None


@dataclass(frozen=True)
class CountRequest:
    body: object
    stretch: object
    t: float
    lattice_set: LatticeSet = LatticeSet.FULL

    def __post_init__(self):
        object.__setattr__(self, 'lattice_set', LatticeSet.coerce(self.lattice_set))
        t = float(self.t)
        if not (t > 0 and math.isfinite(t)):
            raise InputError(f"dilation must be positive and finite, got {self.t}")
        object.__setattr__(self, 't', t)
        if self.stretch.d != self.body.d:
            raise InputError(f"stretch has dimension {self.stretch.d}, body has {self.body.d}")


@dataclass(frozen=True)
class CountResult:
    count: int
    slices_visited: int = 0
    boundary_corrections: int = 0

    def __add__(self, other):
        return CountResult(self.count + other.count,
                           self.slices_visited + other.slices_visited,
                           self.boundary_corrections + other.boundary_corrections)

    def scaled(self, factor):
        return CountResult(factor * self.count, self.slices_visited, self.boundary_corrections)


def count(req, n_jobs=1):
    """Exact number of lattice points of req.lattice_set inside t*A*Omega"""
    a = req.stretch.as_array()
    _check_capacity(req.body, req.t, a)
    if req.lattice_set is LatticeSet.SECTIONS_UNION:
        result = _sections_union(req.body, req.t, a, n_jobs)
    else:
        result = _orthant_count(req.body, req.t, a, req.lattice_set, n_jobs)
    logger.debug("count %s t=%g a=%s -> %d (%d slices, %d corrections)", req.lattice_set.value,
                 req.t, req.stretch.diag, result.count, result.slices_visited,
                 result.boundary_corrections)
    return result


def count_axis_subsets(body, stretch, t, axes):
    """Points with k_i = 0 for i in axes and k_i >= 1 otherwise"""
    axes = sorted(set(int(i) for i in axes))
    if any(i < 0 or i >= body.d for i in axes):
        raise InputError(f"axis subset {axes} out of range for d={body.d}")
    req = CountRequest(body, stretch, t, LatticeSet.POSITIVE)
    if len(axes) == body.d:
        return 1
    if not axes:
        return count(req).count
    a = stretch.without(axes)
    return _orthant_count(body.section(axes), req.t, a, LatticeSet.POSITIVE, 1).count


def count_bruteforce(req):
    """Enumerate the whole bounding box with the membership predicate only"""
    body, t = req.body, req.t
    a = req.stretch.as_array()
    bounds = np.ceil(t * a * np.asarray(body.b)).astype(np.int64)
    total = math.prod(int(2 * n + 1) for n in bounds)
    if total > BRUTEFORCE_CAP:
        raise CapacityError(f"brute force box has {total} points, cap is {BRUTEFORCE_CAP}")

    axes = [np.arange(-n, n + 1) for n in bounds]
    inner = math.prod(len(r) for r in axes[1:])
    rows_per_chunk = max(1, BRUTEFORCE_CHUNK // max(inner, 1))
    found = 0
    for start in range(0, len(axes[0]), rows_per_chunk):
        block = [axes[0][start:start + rows_per_chunk]] + axes[1:]
        points = np.stack(np.meshgrid(*block, indexing='ij'), axis=-1).reshape(-1, body.d)
        points = points[_in_lattice_set(points, req.lattice_set)]
        if len(points):
            inside, _ = membership(body, t, a, points)
            found += int(inside.sum())
    return CountResult(found, slices_visited=0, boundary_corrections=0)


def _in_lattice_set(points, lattice_set):
    if lattice_set is LatticeSet.FULL:
        return np.ones(len(points), dtype=bool)
    if lattice_set is LatticeSet.POSITIVE:
        return np.all(points >= 1, axis=1)
    if lattice_set is LatticeSet.NONNEGATIVE:
        return np.all(points >= 0, axis=1)
    return np.any(points == 0, axis=1)


def _check_capacity(body, t, a):
    extents = t * np.asarray(a) * np.asarray(body.b)
    if not np.all(np.isfinite(extents)):
        raise CapacityError(f"bounding box extents {extents} overflow")
    expected = float(np.prod(2.0 * extents + 1.0))
    if expected > INDEX_CAPACITY:
        raise CapacityError(f"about {expected:.3g} lattice points in the bounding box, "
                            f"more than the supported 2^62")


def _sections_union(body, t, a, n_jobs):
    """Inclusion-exclusion over all nonempty sets of vanishing coordinates"""
    d = body.d
    result = CountResult(0)
    for size in range(1, d + 1):
        sign = 1 if size % 2 else -1
        for axes in itertools.combinations(range(d), size):
            if size == d:
                part = CountResult(1)
            else:
                part = _orthant_count(body.section(axes), t, np.delete(a, axes),
                                      LatticeSet.FULL, n_jobs)
            result = result + part.scaled(sign)
    return result


def _orthant_count(body, t, a, lattice_set, n_jobs):
    a = np.asarray(a, dtype=float)
    extents = t * a * np.asarray(body.b)

    # longest axis innermost
    order = np.argsort(extents, kind='stable')
    if not np.array_equal(order, np.arange(body.d)):
        body = body.permuted(order)
        a = a[order]

    kernel = _SliceKernel(body, t, a)
    lower = 1 if lattice_set is LatticeSet.POSITIVE else 0
    root = np.zeros((1, 0), dtype=np.int64)
    top, corrections = kernel.last_index(root)

    if body.d == 1:
        total = int(_tally(lattice_set, root, top).sum())
        return CountResult(total, 1, corrections)

    values = np.arange(lower, int(top[0]) + 1, dtype=np.int64)
    if not len(values):
        return CountResult(0, 1, corrections)

    n_chunks = max(1, min(len(values), 4 * max(1, int(n_jobs or 1))))
    chunks = [c for c in np.array_split(values, n_chunks) if len(c)]
    parts = Parallel(n_jobs=n_jobs, backend="threading")(
        delayed(_count_chunk)(kernel, chunk, lattice_set, lower) for chunk in chunks)

    result = CountResult(0, 1, corrections)
    for part in parts:
        result = result + part
    return result


def _count_chunk(kernel, top_values, lattice_set, lower):
    """Count all points whose first coordinate is in top_values"""
    prefixes = top_values[:, None]
    slices = 0
    corrections = 0
    for axis in range(1, kernel.d):
        n, fixed = kernel.last_index(prefixes)
        slices += len(prefixes)
        corrections += fixed
        if axis == kernel.d - 1:
            total = int(_tally(lattice_set, prefixes, n).sum())
            return CountResult(total, slices, corrections)
        prefixes = _extend(prefixes, n, lower)
        if not len(prefixes):
            break
    return CountResult(0, slices, corrections)


def _extend(prefixes, n, lower):
    """All prefixes (prefix, k) with lower <= k <= n"""
    sizes = np.maximum(n - lower + 1, 0)
    total = int(sizes.sum())
    starts = np.cumsum(sizes) - sizes
    offsets = np.arange(total, dtype=np.int64) - np.repeat(starts, sizes)
    return np.column_stack([np.repeat(prefixes, sizes, axis=0), lower + offsets])


def _tally(lattice_set, prefixes, n):
    if lattice_set is LatticeSet.FULL:
        weights = np.left_shift(1, (prefixes != 0).sum(axis=1)).astype(np.int64)
        return weights * np.where(n >= 0, 2 * n + 1, 0)
    if lattice_set is LatticeSet.POSITIVE:
        return np.maximum(n, 0)
    return np.maximum(n + 1, 0)


class _SliceKernel:
    """Last admissible index along the next axis for a batch of prefixes"""

    def __init__(self, body, t, a, band=EXACT_BAND):
        self.body = body
        self.t = float(t)
        self.a = np.asarray(a, dtype=float)
        self.band = band
        self.extents = self.t * self.a * np.asarray(body.b)

    @property
    def d(self):
        return self.body.d

    def last_index(self, prefixes):
        """Largest n >= 0 with (prefix, n, 0, ...) inside, or -1; also the number of +-1 steps"""
        axis = prefixes.shape[1]
        width = self._width(prefixes, axis)
        ceiling = math.ceil(self.extents[axis])
        n = np.clip(np.floor(width), -1, ceiling).astype(np.int64)

        corrections = 0
        idx = np.arange(len(n))
        while len(idx):
            up = self._inside(prefixes[idx], n[idx] + 1)
            idx = idx[up]
            n[idx] += 1
            corrections += len(idx)

        idx = np.flatnonzero(n >= 0)
        while len(idx):
            down = ~self._inside(prefixes[idx], n[idx])
            idx = idx[down]
            n[idx] -= 1
            corrections += len(idx)
            idx = idx[n[idx] >= 0]
        return n, corrections

    def _inside(self, prefixes, values):
        axis = prefixes.shape[1]
        points = np.zeros((len(prefixes), self.d), dtype=np.int64)
        points[:, :axis] = prefixes
        points[:, axis] = values
        inside, _ = membership(self.body, self.t, self.a, points, self.band)
        return np.asarray(inside, dtype=bool)

    def _width(self, prefixes, axis):
        extents = self.extents
        if self.body.family is Family.SUPERELLIPSOID:
            p = np.asarray(self.body.p)
            used = ((np.abs(prefixes) / extents[:axis]) ** p[:axis]).sum(axis=1)
            rest = np.clip(1.0 - used, 0.0, None)
            return np.where(used <= 1.0, extents[axis] * rest ** (1.0 / p[axis]), -1.0)

        # generic gauge: bisection on the slice half-width
        base = np.zeros((len(prefixes), self.d))
        base[:, :axis] = prefixes

        def inside(x):
            points = base.copy()
            points[:, axis] = x
            return np.asarray(self.body.gauge_oracle(points / self.a), dtype=float) <= self.t

        lo = np.zeros(len(prefixes))
        hi = np.full(len(prefixes), extents[axis])
        for _ in range(WIDTH_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            ok = inside(mid)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        return np.where(inside(np.zeros(len(prefixes))), lo, -1.0)
