# src/core/measure.py

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from src.core.domain import Family, gauge
from src.core.errors import InputError, NumericalEvaluationError

logger = logging.getLogger(__name__)

DET_TOLERANCE = 1e-6
QUADRATURE_RTOL = 1e-8
QUADRATURE_MAX_NODES = 4_000_000


@dataclass(frozen=True)
class StretchFactor:
    """Positive diagonal matrix of determinant one"""

    diag: tuple

    def __post_init__(self):
        values = np.asarray(self.diag, dtype=float)
        if values.ndim != 1 or len(values) == 0:
            raise InputError(f"stretch needs a non-empty diagonal, got {self.diag!r}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InputError(f"stretch entries must be positive and finite, got {tuple(values)}")

        log_det = float(np.log(values).sum())
        if abs(math.expm1(log_det)) > DET_TOLERANCE:
            raise InputError(f"stretch determinant {math.exp(log_det):.12g} is not 1")
        values = values * math.exp(-log_det / len(values))
        object.__setattr__(self, 'diag', tuple(float(v) for v in values))

    @classmethod
    def identity(cls, d):
        return cls((1.0,) * int(d))

    @classmethod
    def from_log(cls, s):
        """Stretch with log a_i = s_i for i < d and a_d fixed by the determinant"""
        s = np.asarray(s, dtype=float)
        return cls(tuple(np.exp(np.append(s, -s.sum()))))

    @property
    def d(self):
        return len(self.diag)

    @property
    def a_star(self):
        """max of 1/a_i, the sup norm of the inverse"""
        return 1.0 / min(self.diag)

    def as_array(self):
        return np.asarray(self.diag)

    def log_coordinates(self):
        return np.log(self.as_array())[:-1]

    def distance(self, other):
        """max_j |a_j - b_j|"""
        if other.d != self.d:
            raise InputError(f"stretches of dimension {self.d} and {other.d} cannot be compared")
        return float(np.abs(self.as_array() - other.as_array()).max())

    def without(self, axes):
        """Diagonal entries with the given axes removed (no longer of determinant one)"""
        return np.array([a for i, a in enumerate(self.diag) if i not in set(axes)])


class MeasureMethod(enum.Enum):
    CLOSED_FORM = "closed-form"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class SectionMeasures:
    volume: float
    sections: tuple
    method: MeasureMethod


def volume(body, method=None):
    """Lebesgue measure of the body"""
    method = _resolve_method(body, method)
    if method is MeasureMethod.CLOSED_FORM:
        return _dirichlet_volume(body.p, body.b)
    return _ray_quadrature(body)


def section_measure(body, j, method=None):
    """(d-1)-dimensional measure of the section {x_j = 0} (j is a 0-based axis)"""
    if not 0 <= int(j) < body.d:
        raise InputError(f"axis {j} out of range for d={body.d}")
    section = body.section([j])
    if section.d == 1:
        return 2.0 * section.b[0]
    return volume(section, method)


def section_measures(body, method=None):
    """Volume and all d section measures"""
    method = _resolve_method(body, method)
    sections = tuple(section_measure(body, j, method) for j in range(body.d))
    return SectionMeasures(volume=volume(body, method), sections=sections, method=method)


def balanced_factor(body, sections=None):
    """B = diag(|Omega_j| / (prod_k |Omega_k|)^(1/d))"""
    sections = np.asarray(sections if sections is not None else
                          [section_measure(body, j) for j in range(body.d)], dtype=float)
    if np.any(sections <= 0):
        raise InputError(f"section measures must be positive, got {tuple(sections)}")
    geometric_mean = math.exp(np.log(sections).mean())
    return StretchFactor(tuple(sections / geometric_mean))


def balanced_positive_floor(body, t):
    """Lower bound 2^-d |Omega| t^d - 2^(1-d) d (prod |Omega_j|)^(1/d) t^(d-1) for the count at B"""
    d = body.d
    sections = [section_measure(body, j) for j in range(d)]
    geometric_mean = math.exp(np.log(sections).mean())
    return 2.0 ** -d * volume(body) * t ** d - 2.0 ** (1 - d) * d * geometric_mean * t ** (d - 1)


def _resolve_method(body, method):
    if method is None:
        return MeasureMethod.CLOSED_FORM if body.family is Family.SUPERELLIPSOID else MeasureMethod.QUADRATURE
    method = MeasureMethod(method)
    if method is MeasureMethod.CLOSED_FORM and body.family is not Family.SUPERELLIPSOID:
        raise InputError("closed-form measures exist for superellipsoids only")
    return method


def _dirichlet_volume(p, b):
    p = np.asarray(p, dtype=float)
    b = np.asarray(b, dtype=float)
    log_volume = (len(p) * math.log(2.0) + np.log(b).sum()
                  + gammaln(1.0 + 1.0 / p).sum() - gammaln(1.0 + (1.0 / p).sum()))
    return float(math.exp(log_volume))


def _ray_quadrature(body):
    """(1/d) * integral over the sphere of gauge^-d, by product Gauss-Legendre in the first orthant"""
    d = body.d
    if d == 1:
        return 2.0 * body.b[0]

    previous = None
    n = 16
    while True:
        estimate = _orthant_rule(body, n)
        if previous is not None and abs(estimate - previous) <= QUADRATURE_RTOL * abs(estimate):
            logger.debug("Quadrature converged with %d nodes per angle: %.12g", n, estimate)
            return estimate
        if (2 * n) ** (d - 1) > QUADRATURE_MAX_NODES:
            achieved = abs(estimate - previous) / abs(estimate) if previous else math.inf
            raise NumericalEvaluationError("volume quadrature did not converge",
                                           {'nodes_per_angle': n, 'achieved_rtol': achieved})
        previous = estimate
        n *= 2


def _orthant_rule(body, n):
    d = body.d
    nodes, weights = leggauss(n)
    angles = (nodes + 1.0) * (math.pi / 4.0)
    weights = weights * (math.pi / 4.0)

    grids = np.meshgrid(*([angles] * (d - 1)), indexing='ij')
    wgrid = np.ones_like(grids[0])
    for w_axis, axis in zip(np.meshgrid(*([weights] * (d - 1)), indexing='ij'), range(d - 1)):
        wgrid = wgrid * w_axis

    # hyperspherical coordinates restricted to the first orthant
    points = np.empty(grids[0].shape + (d,))
    sine_product = np.ones_like(grids[0])
    jacobian = np.ones_like(grids[0])
    for k in range(d - 1):
        points[..., k] = sine_product * np.cos(grids[k])
        sine_product = sine_product * np.sin(grids[k])
        jacobian = jacobian * np.sin(grids[k]) ** (d - 2 - k)
    points[..., d - 1] = sine_product

    radial = np.asarray(gauge(body, points), dtype=float) ** (-d)
    return float(2 ** d * (wgrid * jacobian * radial).sum() / d)
