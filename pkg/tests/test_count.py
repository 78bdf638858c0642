# tests/test_count.py

import itertools

import numpy as np
import pytest

from src.core.count import (CountRequest, CountResult, LatticeSet, count, count_axis_subsets,
                            count_bruteforce)
from src.core.domain import BodySpec
from src.core.errors import CapacityError, InputError
from src.core.measure import StretchFactor, volume


@pytest.mark.parametrize("lattice_set,expected", [
    ("full", 81),
    ("positive", 15),
    ("nonnegative", 26),
    ("sections-union", 21),
])
def test_disk_of_radius_five(disk, identity2, lattice_set, expected):
    assert count(CountRequest(disk, identity2, 5.0, lattice_set)).count == expected


def test_boundary_points_are_counted(disk, identity2):
    # twelve points satisfy x^2 + y^2 = 25
    assert count(CountRequest(disk, identity2, 5.0)).count == 81
    assert count(CountRequest(disk, identity2, 4.999999)).count == 69


def test_known_counts(disk, sphere, identity2, identity3):
    assert count(CountRequest(disk, identity2, 10.0)).count == 317
    assert count(CountRequest(disk, identity2, 1.0, "positive")).count == 0
    assert count(CountRequest(sphere, identity3, 2.0)).count == 33


def test_stretch_turns_ellipse_into_disk(ellipse):
    B = StretchFactor((0.5, 2.0))
    assert count(CountRequest(ellipse, B, 5.0, LatticeSet.POSITIVE)).count == 15


def test_threads_do_not_change_the_count(ball4):
    A = StretchFactor((1.25, 0.8, 1.0))
    req = CountRequest(ball4, A, 9.5, "nonnegative")
    assert count(req, n_jobs=4).count == count(req, n_jobs=1).count


@pytest.mark.parametrize("body,stretch,t", [
    (BodySpec.superellipsoid((2, 2)), (1.0, 1.0), 7.3),
    (BodySpec.superellipsoid((4, 4)), (1.6, 0.625), 6.0),
    (BodySpec.superellipsoid((2, 2), (2.0, 0.5)), (0.8, 1.25), 4.0),
    (BodySpec.superellipsoid((4, 4, 2)), (1.25, 0.8, 1.0), 4.2),
    (BodySpec.superellipsoid((2, 2, 2)), (2.0, 1.0, 0.5), 3.0),
    (BodySpec.superellipsoid((3, 2.5)), (1.0, 1.0), 5.5),
])
@pytest.mark.parametrize("lattice_set", list(LatticeSet))
def test_matches_bruteforce(body, stretch, t, lattice_set):
    req = CountRequest(body, StretchFactor(stretch), t, lattice_set)
    assert count(req).count == count_bruteforce(req).count


def test_generic_gauge_counts_like_the_disk(generic_disk, identity2):
    for lattice_set, expected in (("full", 81), ("positive", 15), ("sections-union", 21)):
        req = CountRequest(generic_disk, identity2, 5.0, lattice_set)
        assert count(req).count == expected
        assert count_bruteforce(req).count == expected


def test_tiny_dilation_keeps_only_the_origin(disk, identity2):
    assert count_bruteforce(CountRequest(disk, identity2, 0.01)).count == 1
    assert count(CountRequest(disk, identity2, 0.01)).count == 1


def test_axis_subsets(disk, sphere, identity2, identity3):
    assert count_axis_subsets(disk, identity2, 5.0, [0]) == 5
    assert count_axis_subsets(disk, identity2, 5.0, [0, 1]) == 1
    assert count_axis_subsets(disk, identity2, 5.0, []) == 15
    assert count_axis_subsets(sphere, identity3, 2.0, [2]) == 1


def test_full_count_splits_over_zero_patterns(mixed442):
    A = StretchFactor((1.25, 0.8, 1.0))
    t = 4.7
    total = 0
    for size in range(4):
        for axes in itertools.combinations(range(3), size):
            total += 2 ** (3 - size) * count_axis_subsets(mixed442, A, t, axes)
    assert total == count(CountRequest(mixed442, A, t)).count


def test_count_grows_with_dilation(superellipse4, identity2):
    counts = [count(CountRequest(superellipse4, identity2, t, "positive")).count for t in (3, 5, 8, 13)]
    assert counts == sorted(counts)


def test_request_validation(disk, identity2, identity3):
    with pytest.raises(InputError):
        CountRequest(disk, identity2, 0.0)
    with pytest.raises(InputError):
        CountRequest(disk, identity2, float("nan"))
    with pytest.raises(InputError):
        CountRequest(disk, identity3, 1.0)
    with pytest.raises(InputError):
        CountRequest(disk, identity2, 1.0, "odd")


def test_capacity_limits(disk, identity2):
    with pytest.raises(CapacityError):
        count(CountRequest(disk, identity2, 1e19))
    with pytest.raises(CapacityError):
        count_bruteforce(CountRequest(disk, identity2, 1e4))


def test_results_add_up():
    total = CountResult(3, 2, 1) + CountResult(4, 1, 0)
    assert total == CountResult(7, 3, 1)
    assert total.scaled(-1).count == -7


def _random_requests(n, t_max, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        d = int(rng.integers(2, 4))
        body = BodySpec.superellipsoid(rng.choice([2, 4, 6], size=d))
        s = rng.uniform(-np.log(3.0), np.log(3.0), size=d - 1)
        s *= min(1.0, np.log(3.0) / max(abs(s.sum()), 1e-12))
        yield body, StretchFactor.from_log(s), float(rng.uniform(0.5, t_max))


def _check_identities(body, A, t):
    d = body.d
    counts = {s: count(CountRequest(body, A, t, s)).count for s in LatticeSet}
    for s in LatticeSet:
        assert counts[s] == count_bruteforce(CountRequest(body, A, t, s)).count

    assert counts[LatticeSet.FULL] == 2 ** d * counts[LatticeSet.POSITIVE] + counts[LatticeSet.SECTIONS_UNION]
    subsets = sum(count_axis_subsets(body, A, t, axes)
                  for size in range(d + 1) for axes in itertools.combinations(range(d), size))
    assert counts[LatticeSet.NONNEGATIVE] == subsets

    quarter = 2.0 ** -d * volume(body) * t ** d
    assert counts[LatticeSet.POSITIVE] <= quarter <= counts[LatticeSet.NONNEGATIVE]


def test_identities_on_random_requests():
    for body, A, t in _random_requests(40, 8.0, seed=11):
        _check_identities(body, A, t)


@pytest.mark.slow
def test_identities_on_many_random_requests():
    for body, A, t in _random_requests(500, 30.0, seed=5):
        _check_identities(body, A, t)
