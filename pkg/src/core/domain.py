# src/core/domain.py
"""Symmetric convex bodies of finite type and their boundary oracles.

A body Omega is stored through its gauge (Minkowski functional); the
dilated stretch tA(Omega) contains k exactly when gauge(A^-1 k) <= t.
Bodies are closed, so boundary points count as members.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from numpy.polynomial import polynomial as poly
from scipy.special import binom

from src.core.errors import (DegenerateDirectionError, InputError,
                             NumericalEvaluationError)

logger = logging.getLogger(__name__)

GAUGE_RTOL = 1e-14
DIRECTION_MIN_NORM = 1e-12
EXACT_BAND = 1e-9   # |sum - 1| below this goes to rational arithmetic
GAUGE_CHECK_RTOL = 1e-9


class Family(enum.Enum):
    SUPERELLIPSOID = "superellipsoid"
    GENERIC_CONVEX = "generic"


@dataclass(frozen=True)
class BodySpec:
    """A convex body symmetric in every coordinate hyperplane"""

    family: Family
    b: tuple
    p: tuple = ()
    gauge_oracle: object = field(default=None, compare=False)
    max_order: int = 12

    def __post_init__(self):
        b = tuple(float(v) for v in self.b)
        object.__setattr__(self, 'b', b)
        if not b:
            raise InputError("body needs at least one axis")
        if not all(math.isfinite(v) and v > 0 for v in b):
            raise InputError(f"semiaxes must be positive and finite, got {b}")

        if self.family is Family.SUPERELLIPSOID:
            p = tuple(float(v) for v in self.p)
            object.__setattr__(self, 'p', p)
            if len(p) != len(b):
                raise InputError(f"need {len(b)} exponents, got {len(p)}")
            if not all(math.isfinite(v) and v >= 2 for v in p):
                raise InputError(f"exponents must be finite and >= 2, got {p}")
        elif self.family is Family.GENERIC_CONVEX:
            if not callable(self.gauge_oracle):
                raise InputError("generic body needs a callable gauge oracle")
            if self.max_order < 2:
                raise InputError("smoothness certificate must be at least 2")
        else:
            raise InputError(f"unknown body family {self.family!r}")

    # Construction

    @classmethod
    def superellipsoid(cls, p, b=None):
        """Body sum |x_i / b_i|^p_i <= 1"""
        p = tuple(p)
        b = tuple(b) if b is not None else (1.0,) * len(p)
        body = cls(Family.SUPERELLIPSOID, b=b, p=p)
        body._require_dimension()
        return body

    @classmethod
    def generic(cls, gauge, d, max_order=12, check_samples=0, seed=0):
        """Body given by a vectorized gauge oracle mapping (..., d) arrays to (...)

        With check_samples > 0 the oracle is tried on that many random points
        for reflection symmetry, positive homogeneity and midpoint convexity.
        """
        if not callable(gauge):
            raise InputError("generic body needs a callable gauge oracle")
        unit = np.eye(int(d))
        extents = 1.0 / np.asarray(gauge(unit), dtype=float)
        body = cls(Family.GENERIC_CONVEX, b=tuple(extents), gauge_oracle=gauge,
                   max_order=int(max_order))
        body._require_dimension()
        if check_samples > 0:
            _check_gauge(gauge, body.d, int(check_samples), np.random.default_rng(seed))
        return body

    @classmethod
    def parse(cls, text):
        """Parse `family=superellipsoid; d=3; p=4,4,2; b=1,1,1`"""
        entries = {}
        for chunk in str(text).split(';'):
            chunk = chunk.strip()
            if not chunk:
                continue
            if '=' not in chunk:
                raise InputError(f"body entry {chunk!r} is not key=value")
            key, value = (part.strip() for part in chunk.split('=', 1))
            entries[key.lower()] = value

        for key in ('family', 'd', 'p', 'b'):
            if key not in entries:
                raise InputError(f"body specification is missing key '{key}'")
        unknown = sorted(set(entries) - {'family', 'd', 'p', 'b'})
        if unknown:
            raise InputError(f"unknown body keys {unknown}")

        if entries['family'].lower() != Family.SUPERELLIPSOID.value:
            raise InputError(f"text format supports family=superellipsoid only, got {entries['family']!r}")
        try:
            d = int(entries['d'])
            p = [float(v) for v in entries['p'].split(',')]
            b = [float(v) for v in entries['b'].split(',')]
        except ValueError as e:
            raise InputError(f"malformed body specification {text!r}: {e}") from e
        if len(p) != d or len(b) != d:
            raise InputError(f"d={d} but got {len(p)} exponents and {len(b)} semiaxes")
        return cls.superellipsoid(p, b)

    def to_text(self):
        """Inverse of parse for superellipsoids"""
        if self.family is not Family.SUPERELLIPSOID:
            raise InputError("only superellipsoids have a text form")
        fmt = lambda values: ",".join(format(v, '.17g') for v in values)
        return f"family=superellipsoid; d={self.d}; p={fmt(self.p)}; b={fmt(self.b)}"

    def _require_dimension(self):
        if self.d < 2:
            raise InputError(f"dimension must be at least 2, got {self.d}")

    # Properties

    @property
    def d(self):
        return len(self.b)

    @property
    def has_even_exponents(self):
        return (self.family is Family.SUPERELLIPSOID
                and all(v.is_integer() and int(v) % 2 == 0 for v in self.p))

    @property
    def has_integer_exponents(self):
        return self.family is Family.SUPERELLIPSOID and all(v.is_integer() for v in self.p)

    @property
    def smoothness(self):
        """Highest derivative order the oracles may be asked for"""
        if self.family is Family.GENERIC_CONVEX:
            return self.max_order
        if self.has_even_exponents:
            return math.inf
        return int(math.ceil(min(self.p))) - 1

    @property
    def containment_constant(self):
        """Smallest C with the body inside [-C, C]^d"""
        return max(self.b)

    # Derived bodies

    def section(self, axes):
        """Omega intersected with {x_i = 0 for i in axes}, as a body of lower dimension"""
        axes = sorted(set(int(i) for i in axes))
        if any(i < 0 or i >= self.d for i in axes):
            raise InputError(f"section axes {axes} out of range for d={self.d}")
        keep = [i for i in range(self.d) if i not in axes]
        if not keep:
            raise InputError("a section must keep at least one axis")
        if self.family is Family.SUPERELLIPSOID:
            return BodySpec(Family.SUPERELLIPSOID, b=[self.b[i] for i in keep],
                            p=[self.p[i] for i in keep])
        return BodySpec(Family.GENERIC_CONVEX, b=[self.b[i] for i in keep],
                        gauge_oracle=_embedded_gauge(self.gauge_oracle, self.d, keep),
                        max_order=self.max_order)

    def permuted(self, order):
        """Body with coordinates relabelled so new axis i is old axis order[i]"""
        order = [int(i) for i in order]
        if sorted(order) != list(range(self.d)):
            raise InputError(f"{order} is not a permutation of range({self.d})")
        if self.family is Family.SUPERELLIPSOID:
            return BodySpec(Family.SUPERELLIPSOID, b=[self.b[i] for i in order],
                            p=[self.p[i] for i in order])
        inverse = np.argsort(order)
        oracle = self.gauge_oracle
        return BodySpec(Family.GENERIC_CONVEX, b=[self.b[i] for i in order],
                        gauge_oracle=lambda x: oracle(np.asarray(x)[..., inverse]),
                        max_order=self.max_order)

    # Level function: boundary is {level = 1}

    def level(self, x):
        """Defining function; works on float arrays and on object arrays of mpmath numbers"""
        x = np.asarray(x)
        if self.family is Family.SUPERELLIPSOID:
            total = 0
            for i, (pi, bi) in enumerate(zip(self.p, self.b)):
                exponent = int(pi) if pi.is_integer() else pi
                total = total + (np.abs(x[..., i]) / bi) ** exponent
            return total
        return self.gauge_oracle(x)

    def level_gradient(self, x):
        """Gradient of the defining function at a single point"""
        x = np.asarray(x, dtype=float)
        if self.family is Family.SUPERELLIPSOID:
            p = np.asarray(self.p)
            b = np.asarray(self.b)
            return p * np.sign(x) * np.abs(x) ** (p - 1) / b ** p
        step = 1e-6 * self.containment_constant
        grad = np.empty(self.d)
        for i in range(self.d):
            e = np.zeros(self.d)
            e[i] = step
            grad[i] = (float(self.gauge_oracle(x + e)) - float(self.gauge_oracle(x - e))) / (2 * step)
        return grad


def _check_gauge(gauge, d, samples, rng):
    x = rng.standard_normal((samples, d))
    y = rng.standard_normal((samples, d))
    values = lambda z: np.asarray(gauge(z), dtype=float)
    gx, gy = values(x), values(y)
    if not np.all(np.isfinite(gx) & (gx > 0)):
        raise InputError("gauge oracle is not positive and finite away from the origin")

    tol = GAUGE_CHECK_RTOL * np.maximum(gx, gy)
    signs = rng.choice([-1.0, 1.0], size=(samples, d))
    if np.any(np.abs(values(signs * x) - gx) > tol):
        raise InputError("gauge oracle is not symmetric in the coordinate hyperplanes")
    scale = np.exp(rng.uniform(-3.0, 3.0, samples))
    if np.any(np.abs(values(scale[:, None] * x) - scale * gx) > scale * tol):
        raise InputError("gauge oracle is not positively homogeneous")
    if np.any(values(0.5 * (x + y)) > 0.5 * (gx + gy) + tol):
        raise InputError("gauge oracle is not convex")
    logger.debug("gauge oracle passed %d sampled checks", samples)


def _embedded_gauge(gauge, d, keep):
    """Gauge of a coordinate section, evaluated by padding zeros"""
    keep = list(keep)

    def section_gauge(y):
        y = np.asarray(y)
        x = np.zeros(y.shape[:-1] + (d,), dtype=y.dtype)
        x[..., keep] = y
        return gauge(x)

    return section_gauge


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """Point of the boundary with outward normal and oriented tangent frame"""

    coordinates: np.ndarray
    normal: np.ndarray
    frame: np.ndarray           # (d-1, d), rows u_1..u_{d-1}
    section_axis: object = None  # axis j whose section the first d-2 rows are tangent to

    @property
    def d(self):
        return len(self.coordinates)

    def tangent_vector(self, x):
        """Vector sum x_i u_i for tangent coefficients x"""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d - 1,):
            raise InputError(f"need {self.d - 1} tangent coefficients, got shape {x.shape}")
        return x @ self.frame


# Gauge and membership

def gauge(body, x):
    """Minkowski functional inf{lambda > 0 : x in lambda * Omega}"""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != body.d:
        raise InputError(f"points must have {body.d} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("gauge needs finite coordinates")

    if body.family is Family.GENERIC_CONVEX:
        return np.asarray(body.gauge_oracle(x), dtype=float)[()]
    return _superellipsoid_gauge(np.asarray(body.p), np.asarray(body.b), x)


def _superellipsoid_gauge(p, b, x):
    y = np.abs(x) / b
    if np.all(p == p[0]):
        return ((y ** p[0]).sum(axis=-1) ** (1.0 / p[0]))[()]

    flat = y.reshape(-1, y.shape[-1])
    result = np.zeros(flat.shape[0])
    top = flat.max(axis=1)
    active = top > 0
    yy = flat[active]

    # sum (y_i/lambda)^p_i decreases in lambda and is >= 1 at max(y), <= 1 at max(y)*d^(1/min p)
    lo = top[active].copy()
    hi = lo * len(p) ** (1.0 / p.min())
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        above = ((yy / mid[:, None]) ** p).sum(axis=1) > 1.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= GAUGE_RTOL * hi):
            break
    lam = np.sqrt(lo * hi)

    # Newton polishing
    for _ in range(2):
        r = (yy / lam[:, None]) ** p
        value = r.sum(axis=1) - 1.0
        slope = -(p * r).sum(axis=1) / lam
        lam = lam - value / slope

    result[active] = lam
    return result.reshape(y.shape[:-1])[()]


def _exact_level(body, t, a, k):
    """Rational sum |k_i / (t a_i b_i)|^p_i for integer exponents"""
    total = Fraction(0)
    t = Fraction(t)
    for ki, pi, bi, ai in zip(k, body.p, body.b, a):
        if ki == 0:
            continue
        total += (Fraction(abs(int(ki))) / (t * Fraction(ai) * Fraction(bi))) ** int(pi)
    return total


def membership(body, t, a, points, band=EXACT_BAND):
    """Closed membership of integer points in t*diag(a)*Omega.

    Returns the boolean mask and the number of points settled by exact
    rational arithmetic. `a` is any positive diagonal, not necessarily of
    determinant one, so sections can reuse it.
    """
    points = np.asarray(points)
    a = np.asarray(a, dtype=float)
    if points.ndim == 1:
        points = points[None, :]

    if body.family is Family.GENERIC_CONVEX:
        values = np.asarray(body.gauge_oracle(points / a), dtype=float)
        return values <= t, 0

    scales = t * a * np.asarray(body.b)
    values = (np.abs(points) / scales) ** np.asarray(body.p)
    values = values.sum(axis=1)
    inside = values <= 1.0
    if not body.has_integer_exponents:
        return inside, 0

    near = np.flatnonzero(np.abs(values - 1.0) <= band)
    for idx in near:
        inside[idx] = _exact_level(body, t, a, points[idx]) <= 1
    return inside, len(near)


def contains(body, stretch, t, k):
    """True iff the integer point k lies in the closed body t*A*Omega"""
    if not (t > 0 and math.isfinite(t)):
        raise InputError(f"dilation must be positive and finite, got {t}")
    k = np.asarray(k)
    if k.shape != (body.d,):
        raise InputError(f"point must have {body.d} coordinates, got shape {k.shape}")
    if stretch.d != body.d:
        raise InputError(f"stretch has dimension {stretch.d}, body has {body.d}")
    inside, _ = membership(body, t, stretch.diag, k)
    return bool(inside[0])


# Boundary points and frames

def boundary_point_from_direction(body, v, section_axis=None):
    """Boundary point on the ray through v with normal and tangent frame"""
    v = np.asarray(v, dtype=float)
    if v.shape != (body.d,):
        raise InputError(f"direction must have {body.d} coordinates, got shape {v.shape}")
    if not np.all(np.isfinite(v)) or np.linalg.norm(v) < DIRECTION_MIN_NORM:
        raise DegenerateDirectionError(f"direction {v} is too short to define a boundary point")

    P = v / float(gauge(body, v))
    if section_axis is None:
        zero_axes = np.flatnonzero(np.abs(P) <= DIRECTION_MIN_NORM * body.containment_constant)
        section_axis = int(zero_axes[0]) if len(zero_axes) else None
    elif abs(P[section_axis]) > DIRECTION_MIN_NORM * body.containment_constant:
        raise InputError(f"point {P} is not on the coordinate hyperplane x_{section_axis} = 0")

    grad = body.level_gradient(P)
    if section_axis is not None:
        P[section_axis] = 0.0
        grad[section_axis] = 0.0    # symmetry in x_j
    normal = grad / np.linalg.norm(grad)
    frame = _tangent_frame(normal, section_axis)
    return BoundaryPoint(coordinates=P, normal=normal, frame=frame, section_axis=section_axis)


def _tangent_frame(normal, section_axis):
    d = len(normal)
    order = np.argsort(np.abs(normal), kind='stable')
    unit = np.eye(d)

    if section_axis is None:
        rows = _complete_orthonormal([normal], [unit[i] for i in order], d - 1)
    else:
        e_j = unit[section_axis]
        candidates = [unit[i] for i in order if i != section_axis]
        rows = _complete_orthonormal([normal, e_j], candidates, d - 2) + [e_j]

    frame = np.array(rows)
    # {u_1, ..., u_{d-1}, -n} has the orientation of the standard basis
    if np.linalg.det(np.vstack([frame, -normal])) < 0:
        frame[0] = -frame[0]
    return frame


def _complete_orthonormal(fixed, candidates, count):
    rows = []
    for c in candidates:
        if len(rows) == count:
            break
        w = np.array(c, dtype=float)
        for _ in range(2):
            for f in list(fixed) + rows:
                w = w - (w @ f) * f
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            rows.append(w / norm)
    if len(rows) != count:
        raise NumericalEvaluationError("could not complete tangent frame", {'found': len(rows), 'needed': count})
    return rows


# Graph derivatives

def graph_derivative(body, P, x, j, method="auto", extra_digits=0):
    """j-th derivative at 0 of s -> Phi(s x) for the local graph P + V - Phi(V) n(P).

    method: "auto" uses exact Taylor coefficients where the expansion is
    available (superellipsoid axis points) and high precision central
    differences elsewhere; "series" and "numeric" force one path.
    extra_digits raises the working precision of the difference path.
    """
    j = int(j)
    if j < 2:
        raise InputError(f"derivative order must be at least 2, got {j}")
    if j > body.smoothness:
        raise InputError(f"order {j} exceeds the smoothness certificate {body.smoothness}")
    V = P.tangent_vector(x)
    if not np.any(x):
        return 0.0

    axis = _axis_index(body, P)
    series_ok = axis is not None and body.has_even_exponents
    if method == "series" or (method == "auto" and series_ok):
        if not series_ok:
            raise InputError("series derivatives need an even-exponent superellipsoid at an axis point")
        return _series_derivative(body, axis, V, j)
    if method not in ("auto", "numeric"):
        raise InputError(f"unknown derivative method {method!r}")
    return _numeric_derivative(body, P, V, j, extra_digits)


def _axis_index(body, P):
    if body.family is not Family.SUPERELLIPSOID:
        return None
    nonzero = np.flatnonzero(np.abs(P.coordinates) > DIRECTION_MIN_NORM * body.containment_constant)
    return int(nonzero[0]) if len(nonzero) == 1 else None


def _series_derivative(body, k, V, j):
    # Phi(s) = b_k (1 - (1 - sigma(s))^(1/p_k)), sigma(s) = sum_{i != k} |V_i / b_i|^p_i s^p_i
    sigma = np.zeros(j + 1)
    for i, (pi, bi) in enumerate(zip(body.p, body.b)):
        if i == k or int(pi) > j:
            continue
        sigma[int(pi)] += (abs(V[i]) / bi) ** pi

    phi = np.zeros(j + 1)
    term = np.zeros(j + 1)
    term[0] = 1.0
    for n in range(1, j // 2 + 1):
        term = poly.polymul(term, -sigma)[:j + 1]
        phi[:len(term)] -= binom(1.0 / body.p[k], n) * term
    return math.factorial(j) * body.b[k] * phi[j]


def _numeric_derivative(body, P, V, j, extra_digits=0):
    with mpmath.workdps(24 + 5 * j + int(extra_digits)):
        oracle = _MpGraph(body, P, V)
        eps = mpmath.mp.eps
        h0 = mpmath.mpf(body.containment_constant) * eps ** (mpmath.mpf(1) / (j + 6))

        # Richardson tableau over h, h/2, h/4; central differences are even in h
        table = []
        for r in range(3):
            h = h0 / 2 ** r
            row = [oracle.central_difference(j, h)]
            for c in range(1, r + 1):
                row.append(row[c - 1] + (row[c - 1] - table[r - 1][c - 1]) / (4 ** c - 1))
            table.append(row)
        return float(table[2][2])


class _MpGraph:
    """Phi along one tangent direction, solved at the current mpmath precision"""

    def __init__(self, body, P, V):
        self.body = body
        point = np.array([mpmath.mpf(float(c)) for c in P.coordinates], dtype=object)
        self.P = point / self._gauge(point)
        normal = self._normal(self.P)
        direction = np.array([mpmath.mpf(float(c)) for c in V], dtype=object)
        self.n = normal
        self.V = direction - np.dot(direction, normal) * normal
        self.scale = mpmath.mpf(body.containment_constant)
        self.cache = {0: mpmath.mpf(0)}

    def _gauge(self, x):
        if self.body.family is Family.GENERIC_CONVEX:
            return _as_mpf(self.body.gauge_oracle(x))
        # level is homogeneous of degree p only for equal exponents, so bisect the gauge
        lo, hi = mpmath.mpf(0), mpmath.mpf(2) * max(abs(c) / b for c, b in zip(x, self.body.b)) * self.body.d
        for _ in range(mpmath.mp.prec + 8):
            mid = (lo + hi) / 2
            if _as_mpf(self.body.level(x / mid)) > 1:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    def _normal(self, x):
        if self.body.family is Family.SUPERELLIPSOID:
            grad = []
            for c, pi, bi in zip(x, self.body.p, self.body.b):
                exponent = int(pi) if pi.is_integer() else pi
                grad.append(exponent * mpmath.sign(c) * abs(c) ** (exponent - 1) / mpmath.mpf(bi) ** exponent)
            grad = np.array(grad, dtype=object)
        else:
            h = mpmath.mp.eps ** (mpmath.mpf(1) / 3)
            grad = []
            for i in range(len(x)):
                e = np.array([mpmath.mpf(0)] * len(x), dtype=object)
                e[i] = h
                grad.append((self._gauge(x + e) - self._gauge(x - e)) / (2 * h))
            grad = np.array(grad, dtype=object)
        return grad / mpmath.sqrt(np.dot(grad, grad))

    def _residual(self, s, phi):
        return _as_mpf(self.body.level(self.P + s * self.V - phi * self.n)) - 1

    def phi(self, s):
        if s == 0:
            return mpmath.mpf(0)
        if s in self.cache:
            return self.cache[s]
        f = lambda value: self._residual(s, value)

        # outside at 0 (supporting hyperplane), inside a little way along -n
        lo, flo = mpmath.mpf(0), f(mpmath.mpf(0))
        hi = max((s * s) * np.dot(self.V, self.V) / self.scale, mpmath.mp.eps)
        fhi = f(hi)
        while fhi >= 0:
            hi *= 4
            if hi > self.scale:
                raise NumericalEvaluationError("root bracketing failed for the local graph",
                                               {'s': float(s), 'bracket_hi': float(hi)})
            fhi = f(hi)
        while flo < 0:
            lo -= hi
            if -lo > self.scale:
                raise NumericalEvaluationError("root bracketing failed for the local graph",
                                               {'s': float(s), 'bracket_lo': float(lo)})
            flo = f(lo)

        value = _illinois(f, lo, hi, flo, fhi)
        self.cache[s] = value
        return value

    def central_difference(self, j, h):
        total = mpmath.mpf(0)
        for i in range(j + 1):
            s = (mpmath.mpf(j) / 2 - i) * h
            total += (-1) ** i * mpmath.binomial(j, i) * self.phi(s)
        return total / h ** j


def _as_mpf(value):
    """Unwrap 0-d object arrays returned by array-style oracles"""
    if isinstance(value, np.ndarray):
        value = value.item()
    return mpmath.mpf(value)


def _illinois(f, lo, hi, flo, fhi, max_iter=2000):
    """Bracketed regula falsi with the Illinois modification"""
    tol = 16 * mpmath.mp.eps
    side = 0
    for _ in range(max_iter):
        c = (lo * fhi - hi * flo) / (fhi - flo)
        fc = f(c)
        if abs(fc) <= tol or abs(hi - lo) <= tol * max(abs(lo), abs(hi)):
            return c
        if (fc > 0) == (flo > 0):
            lo, flo = c, fc
            if side == -1:
                fhi /= 2
            side = -1
        else:
            hi, fhi = c, fc
            if side == 1:
                flo /= 2
            side = 1
    raise NumericalEvaluationError("local graph root did not converge",
                                   {'bracket': (float(lo), float(hi)), 'iterations': max_iter})
