"""
Shared fixtures for the UMBLT test suite
"""

import numpy as np
import pytest

from umblt.models.coefficients import (
    ConstantField,
    OpticalCoefficients,
    SourceField,
    experiment_coefficients,
)
from umblt.models.mesh import build_grid


@pytest.fixture
def unit_grid():
    """3x3 grid on [0, 1]^2 (h = 1/2, one interior node)"""
    return build_grid((0.0, 1.0, 0.0, 1.0), 3, 3)


@pytest.fixture
def small_grid():
    return build_grid((-1.0, 1.0, -1.0, 1.0), 9, 9)


@pytest.fixture
def constant_coefficients():
    """D = 1, sigma_a = 1, gamma = 1, ell = 2"""
    return OpticalCoefficients(ConstantField(1.0), ConstantField(1.0), gamma=1.0, ell=2.0)


@pytest.fixture
def unit_source():
    return SourceField(ConstantField(1.0), "everywhere")


@pytest.fixture
def exp1():
    return experiment_coefficients(1, gamma=1.0, ell=2.0)


@pytest.fixture
def exp2():
    return experiment_coefficients(2, gamma=1.0, ell=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
