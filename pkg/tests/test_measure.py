# tests/test_measure.py

import math

import pytest
from scipy.special import gamma

from src.core.domain import BodySpec
from src.core.errors import InputError
from src.core.measure import (MeasureMethod, StretchFactor, balanced_factor, balanced_positive_floor,
                              section_measure, section_measures, volume)
from tests.conftest import euclidean_gauge


class TestStretchFactor:

    def test_keeps_unit_determinant(self):
        A = StretchFactor((2.0, 0.5))
        assert A.diag == (2.0, 0.5)
        assert A.d == 2
        assert A.a_star == pytest.approx(2.0)

    def test_renormalizes_small_drift(self):
        A = StretchFactor((2.0, 0.5000001))
        assert math.prod(A.diag) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("diag", [(2.0, 2.0), (1.0, -1.0), (1.0, 0.0), (), (math.inf, 0.0)])
    def test_rejects_invalid_diagonals(self, diag):
        with pytest.raises(InputError):
            StretchFactor(diag)

    def test_log_coordinates(self):
        A = StretchFactor.from_log([math.log(2.0)])
        assert A.diag == pytest.approx((2.0, 0.5))
        assert A.log_coordinates() == pytest.approx([math.log(2.0)])

    def test_without_drops_axes(self):
        A = StretchFactor((2.0, 0.25, 2.0))
        assert A.without([1]).tolist() == pytest.approx([2.0, 2.0])


class TestVolume:

    def test_disk_and_ellipse(self, disk, ellipse):
        assert volume(disk) == pytest.approx(math.pi, rel=1e-12)
        assert volume(ellipse) == pytest.approx(math.pi, rel=1e-12)

    def test_sphere(self, sphere):
        assert volume(sphere) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-12)

    def test_superellipse(self, superellipse4):
        expected = 4.0 * gamma(1.25) ** 2 / gamma(1.5)
        assert volume(superellipse4) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("p", [(2, 2), (4, 4), (2, 2, 2), (4, 4, 2)])
    def test_quadrature_matches_closed_form(self, p):
        body = BodySpec.superellipsoid(p)
        assert volume(body, "quadrature") == pytest.approx(volume(body), rel=1e-6)

    def test_generic_body_uses_quadrature(self):
        ball = BodySpec.generic(euclidean_gauge, 3)
        measures = section_measures(ball)
        assert measures.method is MeasureMethod.QUADRATURE
        assert measures.volume == pytest.approx(4.0 * math.pi / 3.0, rel=1e-6)
        assert measures.sections == pytest.approx((math.pi,) * 3, rel=1e-6)

    def test_closed_form_needs_superellipsoid(self, generic_disk):
        with pytest.raises(InputError):
            volume(generic_disk, "closed-form")


class TestSections:

    def test_planar_sections_are_segments(self, ellipse):
        assert section_measure(ellipse, 0) == pytest.approx(1.0)
        assert section_measure(ellipse, 1) == pytest.approx(4.0)

    def test_axis_out_of_range(self, disk):
        with pytest.raises(InputError):
            section_measure(disk, 2)

    def test_balanced_factor_of_ellipse_maps_it_to_a_disk(self, ellipse):
        B = balanced_factor(ellipse)
        assert B.diag == pytest.approx((0.5, 2.0))

    def test_balanced_factor_of_sphere_is_identity(self, sphere):
        assert balanced_factor(sphere).diag == pytest.approx((1.0, 1.0, 1.0))

    def test_balanced_factor_with_unequal_semiaxes(self):
        body = BodySpec.superellipsoid((4, 4, 4), (1, 1, 2))
        B = balanced_factor(body)
        cube_root = 2.0 ** (1.0 / 3.0)
        assert B.diag == pytest.approx((cube_root, cube_root, 1.0 / cube_root ** 2))

    @pytest.mark.parametrize("p,b", [((4, 2), (1, 3)), ((2, 6), (0.5, 2)), ((4, 4), (2, 1))])
    def test_balanced_plane_body_has_equal_sections(self, p, b):
        body = BodySpec.superellipsoid(p, b)
        B = balanced_factor(body)
        stretched = BodySpec.superellipsoid(p, [a * s for a, s in zip(B.diag, body.b)])
        assert section_measure(stretched, 0) == pytest.approx(section_measure(stretched, 1), rel=1e-12)
        if p == (4, 2):
            assert stretched.b == pytest.approx((math.sqrt(3.0), math.sqrt(3.0)))

    def test_positive_floor_of_disk(self, disk):
        floor = balanced_positive_floor(disk, 10.0)
        assert floor == pytest.approx(25.0 * math.pi - 20.0)
        # 69 points of N^2 lie in the disk of radius 10
        assert floor <= 69
