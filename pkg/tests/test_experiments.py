# tests/test_experiments.py

import math
from fractions import Fraction
from pathlib import Path

import pytest

from src.core.errors import ConfigurationError, InputError
from src.core.measure import StretchFactor
from src.core.stretchopt import OptimizeConfig
from src.harness.config_file import load_config
from src.harness.experiments import (ExperimentConfig, ExperimentKind, RateFit, RateRow, fit_slope,
                                     format_value, gap_experiment, lemma_gap, log_grid, main_terms,
                                     rate_experiment, remainder_experiment, run_experiment,
                                     scaled_constant, write_fit_csv)

ROOT = Path(__file__).resolve().parent.parent


def test_log_grid():
    assert log_grid(1.0, 100.0, 3) == pytest.approx((1.0, 10.0, 100.0))
    with pytest.raises(ConfigurationError):
        log_grid(10.0, 1.0, 5)
    with pytest.raises(ConfigurationError):
        log_grid(1.0, 10.0, 1)


def test_fit_slope_recovers_power_law():
    slope, error = fit_slope([1, 2, 4, 8, 16], [3 * t ** 1.5 for t in (1, 2, 4, 8, 16)])
    assert error is None
    assert slope == pytest.approx(1.5)


def test_fit_slope_skips_zero_rows():
    slope, error = fit_slope([1, 2, 4, 8], [1, 0, 16, 64])
    assert math.isnan(slope)
    assert "3" in error


def test_scaled_constant():
    rows = [RateRow(1.0, 2.0), RateRow(4.0, 8.0), RateRow(16.0, 8.0)]
    assert scaled_constant(rows, Fraction(1, 2)) == pytest.approx(4.0)


def test_kinds():
    assert ExperimentKind("remainder-sections-union").lattice_set.value == "sections-union"
    assert ExperimentKind.RATE_MIN.statistic_name == "sup_deviation"
    assert ExperimentKind.GAP.statistic_name == "min_gap"
    assert not ExperimentKind.GAP.is_remainder


@pytest.mark.parametrize("lattice_set,expected", [
    ("full", 100 * math.pi),
    ("positive", (100 * math.pi - 40) / 4),
    ("nonnegative", (100 * math.pi + 40) / 4),
    ("sections-union", 40.0),
])
def test_main_terms_of_disk(disk, identity2, lattice_set, expected):
    assert main_terms(disk, identity2, 10.0, lattice_set) == pytest.approx(expected)


def test_lemma_gap_of_disk(disk, identity2):
    lower, upper = lemma_gap(disk, identity2, 10.0)
    # 69 points in N^2 and 90 in Z_+^2 at t = 10
    assert lower == pytest.approx((25 * math.pi - 69) / 10)
    assert upper == pytest.approx((90 - 25 * math.pi) / 10)


def test_config_validation(disk):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(disk, (), "gap")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(disk, (10.0, 5.0), "gap")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(disk, (0.0, 5.0), "gap")
    with pytest.raises(InputError):
        ExperimentConfig(disk, (5.0,), "gap", stretch=StretchFactor.identity(3))
    with pytest.raises(ValueError):
        ExperimentConfig(disk, (5.0,), "remainder-odd")


def test_remainder_experiment_on_disk(disk):
    cfg = ExperimentConfig(disk, (10, 20, 30, 40, 50), "remainder-full", name="disk", samples=8)
    fit = remainder_experiment(cfg)
    assert fit.theoretical_exponent == Fraction(2, 3)
    assert fit.rows[0].values['count'] == 317
    assert fit.rows[0].statistic == pytest.approx(abs(317 - 100 * math.pi))
    assert fit.rows[1].values['count'] == 1257
    assert fit.fit_error is None
    assert math.isfinite(fit.fitted_slope)


def test_remainder_exponent_in_three_dimensions(sphere):
    cfg = ExperimentConfig(sphere, (4, 6, 8, 10), "remainder-full", samples=8)
    fit = remainder_experiment(cfg)
    # d - 1 - min(nu, mu / (d - mu)) with nu = mu = 1
    assert fit.theoretical_exponent == Fraction(3, 2)


def test_gap_experiment_on_disk(disk):
    cfg = ExperimentConfig(disk, (10, 20, 30, 40), "gap", min_gap=0.0)
    fit = gap_experiment(cfg)
    assert fit.theoretical_exponent == 0
    assert fit.minimum > 0
    assert fit.rows[0].values['lower_gap'] == pytest.approx((25 * math.pi - 69) / 10)
    assert fit.passed


def test_rate_experiment_rows(disk):
    cfg = ExperimentConfig(disk, (5, 10, 15, 20), "rate-max", samples=8,
                           optimize=OptimizeConfig(box=3.0))
    fit = run_experiment(cfg)
    assert fit.theoretical_exponent == Fraction(-1, 6)
    assert [row.t for row in fit.rows] == [5.0, 10.0, 15.0, 20.0]
    for row in fit.rows:
        assert row.complete
        assert row.statistic >= 0
        assert set(row.values) == {'value', 'a1', 'a2', 'a_star_max', 'touches_box'}
        assert row.values['a_star_max'] <= 3.0 + 1e-9


def test_rate_experiment_marks_budget_exhaustion(disk):
    opt = OptimizeConfig(strategy="grid", initial_step=1.0, budget=8)
    cfg = ExperimentConfig(disk, (20,), "rate-max", samples=8, optimize=opt)
    fit = rate_experiment(cfg)
    assert not fit.rows[0].complete
    assert fit.rows[0].values['value'] == 294
    assert not fit.passed


def test_wrong_kind_is_rejected(disk):
    with pytest.raises(ConfigurationError):
        gap_experiment(ExperimentConfig(disk, (5,), "rate-max"))
    with pytest.raises(ConfigurationError):
        rate_experiment(ExperimentConfig(disk, (5,), "gap"))


def test_fit_passes_only_in_bound_direction():
    rows = tuple(RateRow(t, 1.0) for t in (1, 2, 4, 8))
    fit = RateFit("x", ExperimentKind.REMAINDER_FULL, rows, fitted_slope=0.7,
                  theoretical_exponent=Fraction(2, 3), constant=1.0, max_slope=0.767)
    assert fit.passed
    steep = RateFit("x", ExperimentKind.REMAINDER_FULL, rows, fitted_slope=0.9,
                    theoretical_exponent=Fraction(2, 3), constant=1.0, max_slope=0.767)
    assert not steep.passed


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(317) == "317"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(Fraction(2, 3)) == "0.66666666666666663"


def test_write_fit_csv(tmp_path, disk):
    cfg = ExperimentConfig(disk, (10, 20, 30, 40), "gap")
    path = tmp_path / "out" / "gap.csv"
    write_fit_csv(gap_experiment(cfg), path)
    lines = path.read_bytes().decode('utf-8').split('\n')
    assert lines[0] == "t,min_gap,lower_gap,upper_gap,complete"
    assert lines[1].startswith("10,")
    assert lines[1].endswith(",true")
    assert lines[-1] == ""
    assert len(lines) == 6


def test_window_keeps_the_largest_remainder(disk):
    plain = remainder_experiment(ExperimentConfig(disk, (10, 20, 30, 40), "remainder-full", samples=8))
    windowed = remainder_experiment(ExperimentConfig(disk, (10, 20, 30, 40), "remainder-full", samples=8,
                                                     window=8))
    for a, b in zip(plain.rows, windowed.rows):
        assert b.values['count'] == a.values['count']
        assert b.statistic >= a.statistic
        assert a.t <= b.values['worst_t'] < 1.1 * a.t
    with pytest.raises(ConfigurationError):
        ExperimentConfig(disk, (10,), "remainder-full", window=0)


def test_gap_stays_positive_up_to_200(disk):
    cfg = ExperimentConfig(disk, log_grid(20, 200, 8), "gap", min_gap=0.0)
    fit = gap_experiment(cfg)
    assert fit.minimum > 0
    assert fit.passed


@pytest.mark.slow
def test_disk_optima_approach_the_balanced_factor(disk):
    cfg = ExperimentConfig(disk, tuple(range(50, 501, 50)), "rate-max", samples=8,
                           optimize=OptimizeConfig(strategy="exact2d"))
    fit = rate_experiment(cfg)
    assert all(row.complete for row in fit.rows)
    deviation = {row.t: row.statistic for row in fit.rows}
    early = (deviation[50.0] + deviation[100.0]) / 2
    late = (deviation[400.0] + deviation[450.0] + deviation[500.0]) / 3
    assert late < early
    assert math.isfinite(max(row.statistic * row.t ** (1 / 6) for row in fit.rows))
    assert fit.a_star_max <= 4.0


@pytest.mark.slow
def test_shipped_remainder_experiments_pass():
    experiments = load_config(ROOT / "configs" / "balancing.cfg")
    remainders = [cfg for cfg in experiments if cfg.kind.is_remainder]
    assert len(remainders) == 3
    fits = [remainder_experiment(cfg) for cfg in remainders]
    for cfg, fit in zip(remainders, fits):
        assert fit.fit_error is None
        assert fit.fitted_slope <= cfg.max_slope, cfg.name
        assert fit.passed, cfg.name
    assert fits[0].fitted_slope > 0
