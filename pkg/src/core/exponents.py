# src/core/exponents.py
"""Multitype of the boundary and the exponents built from it.

At a boundary point P the boundary is the graph of a convex function Phi
over the tangent plane. The forms q_m(x) = D_x^m Phi(0) give a flag of
zero subspaces S^2 >= S^4 >= ... >= {0}; the multitype lists each order m
as many times as the dimension drops when q_m is first nonzero.
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize
from scipy.special import ndtri
from scipy.stats import qmc

from src.core.domain import (DIRECTION_MIN_NORM, Family, boundary_point_from_direction,
                             graph_derivative)
from src.core.errors import AnalysisError, FiniteTypeError, InputError

logger = logging.getLogger(__name__)

ZERO_TOLERANCE = 1e-7      # q_m below this fraction of its scale is a zero candidate
SETTLE_DIGITS = 24         # extra working digits when a candidate is settled
SETTLE_TOLERANCE = 1e-28   # settled probe directions below this fraction of the scale are flat
SEARCH_TOLERANCE = 1e-16   # the same for directions found by the local search
REFINE_RATIO = 1e-2        # probe minimum this far below the maximum triggers a local search
VERIFY_SAMPLES = 3


class Strategy(enum.Enum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class FlagLevel:
    """Order m where the zero subspace shrinks, with an orthonormal basis of S^m in tangent coordinates"""

    order: int
    basis: np.ndarray

    @property
    def dimension(self):
        return len(self.basis)


@dataclass(frozen=True)
class MultitypeReport:
    point: object
    multitype: tuple
    flag: tuple
    nu: Fraction
    nu2: Fraction
    strategy: Strategy


@dataclass(frozen=True)
class SamplingConfig:
    samples: int = 10_000
    strategy: Strategy = Strategy.ANALYTIC
    seed: int = 0
    n_jobs: int = 1
    max_order: int = None


@dataclass(frozen=True)
class ExponentReport:
    nu_min: Fraction
    mu: Fraction
    gamma: Fraction
    nu_points: tuple
    nu2_points: tuple
    sample_count: int
    canonical: tuple = field(default=(), repr=False)

    @property
    def minimizing_points(self):
        return {'nu': self.nu_points, 'nu2': self.nu2_points}


@dataclass(frozen=True)
class SectionCheck:
    section_multitype: tuple
    full_multitype: tuple
    holds: bool
    section_nu: Fraction
    full_nu: Fraction

    @property
    def nu_gap_holds(self):
        """1 + nu of the section exceeds nu of the body"""
        return 1 + self.section_nu > self.full_nu


def nu_values(multitype):
    """(sum 1/a_i, sum over i >= 2 of 1/a_i) as exact fractions"""
    parts = [Fraction(1, int(a)) for a in sorted(multitype)]
    return sum(parts, Fraction(0)), sum(parts[1:], Fraction(0))


def gamma_from(nu_min, mu, d):
    return min(Fraction(nu_min) / 2, Fraction(mu) / (2 * (d - Fraction(mu))))


# Multitype at one point

def multitype_at(body, P, strategy=Strategy.NUMERIC, max_order=None, derivative_method="auto", seed=0):
    """Multitype, flag and nu values of the boundary at P"""
    strategy = Strategy(strategy)
    _require_finite_type(body)
    if strategy is Strategy.ANALYTIC:
        multitype, flag = _analytic_multitype(body, P)
    else:
        order_cap = max_order or _max_order(body)
        multitype, flag = _numeric_multitype(body, P, order_cap, derivative_method, seed)
    nu, nu2 = nu_values(multitype)
    return MultitypeReport(point=P, multitype=multitype, flag=flag, nu=nu, nu2=nu2, strategy=strategy)


def nu_at(body, P, strategy=Strategy.NUMERIC):
    report = multitype_at(body, P, strategy)
    return report.nu, report.nu2


def _require_finite_type(body):
    if body.family is Family.SUPERELLIPSOID and not body.has_even_exponents:
        raise InputError(f"multitype analysis needs even integer exponents, got {body.p}")


def _max_order(body):
    if body.family is Family.SUPERELLIPSOID:
        return int(max(body.p))
    return int(body.max_order)


def _zero_axes(body, P):
    coords = np.asarray(P.coordinates)
    return [i for i in range(body.d) if abs(coords[i]) <= DIRECTION_MIN_NORM * body.containment_constant]


def _analytic_multitype(body, P):
    if body.family is not Family.SUPERELLIPSOID:
        raise InputError("analytic multitype exists for superellipsoids only")
    zero = _zero_axes(body, P)
    nonzero = body.d - len(zero)
    multitype = tuple(sorted([2] * (nonzero - 1) + [int(body.p[i]) for i in zero]))

    # S^m is spanned by the zero axes with p_i > m
    flag = []
    for order in sorted(set(multitype)):
        axes = [i for i in zero if body.p[i] > order]
        basis = np.array([P.frame @ np.eye(body.d)[i] for i in axes]).reshape(len(axes), body.d - 1)
        flag.append(FlagLevel(order, basis))
    return multitype, tuple(flag)


def _numeric_multitype(body, P, max_order, derivative_method, seed):
    rng = np.random.default_rng(seed)
    dim = body.d - 1
    S = np.eye(dim)
    scale = body.containment_constant
    multitype = []
    flag = []

    for m in range(2, max_order + 1, 2):
        if not len(S):
            break
        q = _Form(body, P, m, derivative_method)
        probes = _probe_directions(len(S), rng) @ S
        values = np.array([abs(q(x)) for x in probes])
        q_max = float(values.max())
        form_scale = max(q_max, scale ** (1 - m))

        if m > 2:
            _check_odd_order(body, P, m - 1, S, derivative_method, rng,
                             ZERO_TOLERANCE * max(q_max * scale, scale ** (2 - m)))

        Z = _zero_subspace(q, S, probes, values, form_scale, rng)
        _verify_zero_subspace(q, Z, form_scale, rng, m)
        if len(Z) < len(S):
            multitype.extend([m] * (len(S) - len(Z)))
            flag.append(FlagLevel(m, Z))
            logger.debug("order %d: zero subspace dimension %d -> %d", m, len(S), len(Z))
        S = Z

    if len(S):
        raise FiniteTypeError(f"flag at {np.round(P.coordinates, 12)} still has dimension {len(S)} "
                              f"after order {max_order}")
    return tuple(sorted(multitype)), tuple(flag)


class _Form:
    """x -> D_x^m Phi(0), memoized on the direction"""

    def __init__(self, body, P, m, method):
        self.body = body
        self.P = P
        self.m = m
        self.method = method
        self.cache = {}
        self.settled_cache = {}

    def __call__(self, x):
        key = tuple(np.round(x, 15))
        if key not in self.cache:
            self.cache[key] = graph_derivative(self.body, self.P, np.asarray(x, dtype=float),
                                               self.m, self.method)
        return self.cache[key]

    def settled(self, x):
        """The same value recomputed with SETTLE_DIGITS more working digits"""
        key = tuple(np.round(x, 15))
        if key not in self.settled_cache:
            self.settled_cache[key] = graph_derivative(self.body, self.P, np.asarray(x, dtype=float),
                                                       self.m, self.method, extra_digits=SETTLE_DIGITS)
        return self.settled_cache[key]


def _probe_directions(k, rng):
    """Unit vectors, diagonals and random directions of R^k"""
    unit = np.eye(k)
    probes = list(unit)
    for i, j in itertools.combinations(range(k), 2):
        probes.append((unit[i] + unit[j]) / math.sqrt(2))
        probes.append((unit[i] - unit[j]) / math.sqrt(2))
    if k > 1:
        extra = rng.standard_normal((4 * k, k))
        probes.extend(extra / np.linalg.norm(extra, axis=1, keepdims=True))
    return np.array(probes)


def _unit_combinations(basis, rng, count):
    coeffs = rng.standard_normal((count, len(basis)))
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    return coeffs @ basis


def _zero_subspace(q, S, probes, values, form_scale, rng):
    """Greedy span of zero directions of q inside span(S)"""
    found = []
    U = S
    candidates, candidate_values = probes, values
    while len(U):
        z = _find_zero_direction(q, U, candidates, candidate_values, form_scale)
        if z is None:
            break
        found.append(z)
        Z = _orthonormal_rows(np.array(found))
        U = _complement_rows(S, Z)
        if not len(U):
            break
        candidates = _probe_directions(len(U), rng) @ U
        candidate_values = np.array([abs(q(x)) for x in candidates])
    if not found:
        return np.zeros((0, S.shape[1]))
    return _orthonormal_rows(np.array(found))


def _find_zero_direction(q, U, candidates, values, form_scale):
    threshold = ZERO_TOLERANCE * form_scale
    best = int(np.argmin(values))
    if values[best] < threshold and abs(q.settled(candidates[best])) <= SETTLE_TOLERANCE * form_scale:
        return candidates[best]
    top = float(values.max())
    if len(U) == 1 or values[best] >= REFINE_RATIO * top:
        return None

    # local search on the unit sphere of span(U)
    def objective(c):
        norm = np.linalg.norm(c)
        if norm == 0:
            return top
        return abs(q((c / norm) @ U))

    start = np.linalg.lstsq(U.T, candidates[best], rcond=None)[0]
    result = minimize(objective, start, method="Nelder-Mead",
                      options={'xatol': 1e-10, 'fatol': threshold * 1e-3, 'maxiter': 400})
    if result.fun >= threshold:
        return None
    z = (result.x / np.linalg.norm(result.x)) @ U
    # landing on the small probe value means nearly flat, not flat
    value = abs(q.settled(z))
    if value <= SEARCH_TOLERANCE * form_scale and value <= REFINE_RATIO * values[best]:
        return z
    return None


def _verify_zero_subspace(q, Z, form_scale, rng, m):
    if not len(Z):
        return
    for x in _unit_combinations(Z, rng, VERIFY_SAMPLES):
        value = q.settled(x)
        if abs(value) > SEARCH_TOLERANCE * form_scale:
            raise AnalysisError(f"zero set of the order {m} form is not a linear subspace "
                                f"(q = {value:.3g} on its span)")


def _check_odd_order(body, P, order, S, method, rng, threshold):
    directions = list(S) + list(_unit_combinations(S, rng, 1))
    for x in directions:
        value = graph_derivative(body, P, x, order, method)
        if abs(value) >= threshold:
            raise AnalysisError(f"odd order {order} derivative {value:.3g} does not vanish "
                                f"at {np.round(P.coordinates, 12)}")


def _orthonormal_rows(rows):
    u, s, vt = np.linalg.svd(np.atleast_2d(rows), full_matrices=False)
    rank = int((s > 1e-8 * s.max()).sum()) if len(s) else 0
    return vt[:rank]


def _complement_rows(S, Z):
    """Orthonormal basis of span(S) minus span(Z)"""
    projected = S - (S @ Z.T) @ Z
    if not len(projected):
        return projected
    u, s, vt = np.linalg.svd(projected, full_matrices=False)
    rank = len(S) - len(Z)
    return vt[:rank] if rank > 0 else np.zeros((0, S.shape[1]))


# Minimization over the boundary

def zero_pattern_points(body):
    """Boundary points on every coordinate subspace, axis points included"""
    points = []
    for size in range(1, body.d + 1):
        for kept in itertools.combinations(range(body.d), size):
            v = np.zeros(body.d)
            v[list(kept)] = 1.0
            points.append(boundary_point_from_direction(body, v))
    return points


def quasi_uniform_points(body, count, seed=0):
    """Boundary points on rays through a scrambled Halton sample of the sphere"""
    if count <= 0:
        return []
    sampler = qmc.Halton(d=body.d, scramble=True, seed=seed)
    u = np.clip(sampler.random(count), 1e-12, 1 - 1e-12)
    directions = ndtri(u)
    keep = np.linalg.norm(directions, axis=1) > DIRECTION_MIN_NORM
    return [boundary_point_from_direction(body, v) for v in directions[keep]]


def exponent_report(body, sampling=None):
    """nu_Omega, mu_Omega and gamma from a structured boundary sample"""
    sampling = sampling or SamplingConfig()
    strategy = Strategy(sampling.strategy)
    _require_finite_type(body)

    canonical_points = zero_pattern_points(body)
    points = canonical_points + quasi_uniform_points(body, sampling.samples, sampling.seed)
    logger.info("Analysing %d boundary points (%s)", len(points), strategy.value)

    reports = Parallel(n_jobs=sampling.n_jobs, backend="threading")(
        delayed(multitype_at)(body, P, strategy, sampling.max_order) for P in points)

    nu_min = min(r.nu for r in reports)
    nu2_min = min(r.nu2 for r in reports)
    mu = Fraction(1, 2) + nu2_min
    gamma = gamma_from(nu_min, mu, body.d)
    return ExponentReport(
        nu_min=nu_min,
        mu=mu,
        gamma=gamma,
        nu_points=tuple(r.point for r in reports if r.nu == nu_min),
        nu2_points=tuple(r.point for r in reports if r.nu2 == nu2_min),
        sample_count=len(reports),
        canonical=tuple(reports[:len(canonical_points)]),
    )


def section_multitype_check(body, j, P, strategy=Strategy.NUMERIC):
    """Multitype of the section body at P against the body's own: a~_i <= a_(i+1)"""
    if body.d < 3:
        raise InputError("section multitype check needs d >= 3")
    j = int(j)
    coords = np.asarray(P.coordinates, dtype=float)
    if abs(coords[j]) > DIRECTION_MIN_NORM * body.containment_constant:
        raise InputError(f"point {coords} is not on the section x_{j} = 0")

    if P.section_axis != j:
        P = boundary_point_from_direction(body, coords, section_axis=j)
    section = body.section([j])
    P_section = boundary_point_from_direction(section, np.delete(coords, j))

    full = multitype_at(body, P, strategy)
    partial = multitype_at(section, P_section, strategy)
    holds = all(a <= b for a, b in zip(partial.multitype, full.multitype[1:]))
    return SectionCheck(section_multitype=partial.multitype, full_multitype=full.multitype,
                        holds=holds, section_nu=partial.nu, full_nu=full.nu)
