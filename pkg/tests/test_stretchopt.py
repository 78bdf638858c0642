# tests/test_stretchopt.py

import math

import numpy as np
import pytest

from src.core.count import CountRequest, LatticeSet, count
from src.core.errors import ConfigurationError, InputError, PartialResultError
from src.core.measure import StretchFactor
from src.core.stretchopt import (Mode, OptimizeConfig, OptimumReport, SearchStrategy,
                                 critical_values_2d, default_box, deviation_from_balanced, optimize)


def _count(body, A, t, lattice_set):
    return count(CountRequest(body, A, t, lattice_set)).count


def _log_samples(K, n):
    return [StretchFactor((a, 1.0 / a)) for a in np.exp(np.linspace(-math.log(K), math.log(K), n))]


class TestCriticalValues:

    def test_tangency_of_the_unit_point(self, disk):
        values = critical_values_2d(disk, math.sqrt(2.0), 2.0)
        assert any(abs(v - 1.0) < 1e-6 for v in values)

    def test_pythagorean_point(self, disk):
        # (3, 4) is on the boundary of 5 diag(a, 1/a) D for a = 3/4 and a = 1
        values = critical_values_2d(disk, 5.0, 2.0)
        assert any(abs(v - 0.75) < 1e-9 for v in values)
        assert any(abs(v - 1.0) < 1e-9 for v in values)
        assert values == sorted(values)
        assert all(0.5 <= v <= 2.0 for v in values)

    def test_empty_box(self, disk):
        assert critical_values_2d(disk, 5.0, 1.0) == []

    def test_needs_the_plane(self, sphere):
        with pytest.raises(InputError):
            critical_values_2d(sphere, 5.0, 2.0)


def test_modes():
    assert Mode.MAX_POSITIVE.lattice_set is LatticeSet.POSITIVE
    assert Mode.MIN_NONNEGATIVE.lattice_set is LatticeSet.NONNEGATIVE
    assert Mode("min-nonnegative").key(5) == -5


def test_default_box_of_disk(disk):
    assert default_box(disk) == pytest.approx(8.0)


def test_deviation_from_balanced(identity2):
    report = OptimumReport(value=0, optima=(StretchFactor((1.1, 1 / 1.1)),), sup_deviation=0.0,
                           a_star_max=1.1, evaluations=1)
    assert deviation_from_balanced(report, identity2) == pytest.approx(0.1)
    empty = OptimumReport(value=0, optima=(), sup_deviation=0.0, a_star_max=0.0, evaluations=0)
    assert deviation_from_balanced(empty, identity2) == 0.0


class TestExact2D:

    @pytest.mark.parametrize("t", [5.0, 12.0, 17.5])
    def test_maximum_beats_every_sampled_stretch(self, disk, t):
        report = optimize(disk, t, OptimizeConfig(mode="max-positive", box=3.0))
        assert report.value >= max(_count(disk, A, t, "positive") for A in _log_samples(3.0, 301))
        assert report.value >= _count(disk, StretchFactor.identity(2), t, "positive")
        for A in report.optima:
            assert _count(disk, A, t, "positive") == report.value

    @pytest.mark.parametrize("t", [5.0, 12.0])
    def test_minimum_is_below_every_sampled_stretch(self, disk, t):
        report = optimize(disk, t, OptimizeConfig(mode="min-nonnegative", box=3.0))
        assert report.value <= min(_count(disk, A, t, "nonnegative") for A in _log_samples(3.0, 301))
        for A in report.optima:
            assert _count(disk, A, t, "nonnegative") == report.value

    def test_report_fields(self, ellipse):
        report = optimize(ellipse, 10.0)
        assert report.mode is Mode.MAX_POSITIVE
        assert report.balanced.diag == pytest.approx((0.5, 2.0))
        assert report.sup_deviation == pytest.approx(deviation_from_balanced(report, report.balanced))
        assert report.a_star_max == pytest.approx(max(A.a_star for A in report.optima))
        assert not report.touches_box
        assert report.evaluations >= len(report.optima)

    def test_budget_overrun_raises_with_the_best_so_far(self, disk):
        with pytest.raises(PartialResultError) as excinfo:
            optimize(disk, 30.0, OptimizeConfig(budget=2))
        best = excinfo.value.best
        assert best.value == optimize(disk, 30.0).value
        assert 1 <= len(best.optima) <= 2
        assert best.evaluations == 2

    @pytest.mark.parametrize("t", [12.0, 30.0, 50.0])
    def test_disk_optima_are_swap_symmetric(self, disk, t):
        report = optimize(disk, t, OptimizeConfig(box=3.0))
        logs = sorted(math.log(A.diag[0]) for A in report.optima)
        assert logs == pytest.approx(sorted(-s for s in logs), abs=1e-9)

    def test_needs_d_equal_two(self, sphere):
        with pytest.raises(ConfigurationError):
            optimize(sphere, 5.0, OptimizeConfig(strategy="exact2d"))

    @pytest.mark.slow
    def test_optimal_disk_stretches_stay_bounded(self, disk):
        for t in range(50, 501, 50):
            report = optimize(disk, float(t), OptimizeConfig(box=5.0))
            assert report.a_star_max <= 4.0
            assert not report.touches_box


class TestGrid:

    def test_optima_are_genuine(self, disk):
        t = 12.0
        grid = optimize(disk, t, OptimizeConfig(strategy="grid", box=3.0, grid_levels=4, initial_step=0.1))
        exact = optimize(disk, t, OptimizeConfig(strategy="exact2d", box=3.0))
        assert grid.value == exact.value
        assert grid.value >= _count(disk, StretchFactor.identity(2), t, "positive")
        for A in grid.optima:
            assert _count(disk, A, t, "positive") == grid.value

    @pytest.mark.parametrize("mode", ["max-positive", "min-nonnegative"])
    def test_matches_exact_sweep(self, disk, mode):
        t = 20.0
        opts = dict(mode=mode, box=3.0, budget=1_000_000)
        grid = optimize(disk, t, OptimizeConfig(strategy="grid", grid_levels=12, **opts))
        exact = optimize(disk, t, OptimizeConfig(strategy="exact2d", **opts))
        assert grid.value == exact.value
        for A in grid.optima:
            assert _count(disk, A, t, Mode(mode).lattice_set) == grid.value

    def test_matches_exact_sweep_on_ellipse(self, ellipse):
        opts = dict(box=3.0, budget=1_000_000)
        grid = optimize(ellipse, 15.0, OptimizeConfig(strategy="grid", grid_levels=12, **opts))
        assert grid.value == optimize(ellipse, 15.0, OptimizeConfig(**opts)).value

    @pytest.mark.slow
    @pytest.mark.parametrize("t", [20.0, 37.0, 50.0, 73.0, 100.0])
    def test_matches_exact_sweep_on_disk(self, disk, t):
        opts = dict(box=3.0, budget=10_000_000)
        grid = optimize(disk, t, OptimizeConfig(strategy="grid", grid_levels=12, **opts))
        assert grid.value == optimize(disk, t, OptimizeConfig(**opts)).value

    def test_three_dimensions(self, sphere):
        t = 6.0
        report = optimize(sphere, t, OptimizeConfig(strategy="grid", box=2.0, grid_levels=2, initial_step=0.25))
        assert report.value >= _count(sphere, StretchFactor.identity(3), t, "positive")
        for A in report.optima:
            assert A.d == 3
            assert math.prod(A.diag) == pytest.approx(1.0)
            assert A.a_star <= 2.0 * (1 + 1e-9)
            assert _count(sphere, A, t, "positive") == report.value

    def test_budget_exhaustion_keeps_the_best_so_far(self, disk):
        cfg = OptimizeConfig(strategy="grid", initial_step=1.0, budget=8)
        with pytest.raises(PartialResultError) as excinfo:
            optimize(disk, 20.0, cfg)
        best = excinfo.value.best
        assert best is not None
        assert best.value == _count(disk, StretchFactor.identity(2), 20.0, "positive")

    def test_level_zero_larger_than_budget(self, disk):
        with pytest.raises(ConfigurationError):
            optimize(disk, 20.0, OptimizeConfig(strategy="grid", initial_step=1.0, budget=3))


def test_strategy_names():
    assert OptimizeConfig(strategy="grid").strategy is SearchStrategy.GRID


def test_configuration_errors(disk):
    with pytest.raises(ConfigurationError):
        OptimizeConfig(box=1.0)
    with pytest.raises(ConfigurationError):
        OptimizeConfig(budget=0)
    with pytest.raises(ConfigurationError):
        optimize(disk, 0.5)
    with pytest.raises(InputError):
        optimize(disk, -1.0)
