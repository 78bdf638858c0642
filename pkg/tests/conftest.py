# tests/conftest.py

import numpy as np
import pytest

from src.core.domain import BodySpec
from src.core.measure import StretchFactor


def euclidean_gauge(x):
    """Unit ball gauge written with array arithmetic so it also takes mpmath object arrays"""
    x = np.asarray(x)
    return (x * x).sum(axis=-1) ** 0.5


@pytest.fixture
def disk():
    return BodySpec.superellipsoid((2, 2))


@pytest.fixture
def ellipse():
    return BodySpec.superellipsoid((2, 2), (2.0, 0.5))


@pytest.fixture
def superellipse4():
    return BodySpec.superellipsoid((4, 4))


@pytest.fixture
def sphere():
    return BodySpec.superellipsoid((2, 2, 2))


@pytest.fixture
def ball4():
    return BodySpec.superellipsoid((4, 4, 4))


@pytest.fixture
def mixed442():
    return BodySpec.superellipsoid((4, 4, 2))


@pytest.fixture
def generic_disk():
    return BodySpec.generic(euclidean_gauge, 2)


@pytest.fixture
def identity2():
    return StretchFactor.identity(2)


@pytest.fixture
def identity3():
    return StretchFactor.identity(3)
