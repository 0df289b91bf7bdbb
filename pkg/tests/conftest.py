import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from fields import AffineField, PolynomialField, ZeroField  # noqa: E402
from jets import JetSystem  # noqa: E402
from paths import FbmSpec, sample_fbm, smooth_path  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: fine grids and Monte Carlo runs with thousands of replicates")


@pytest.fixture(scope="session")
def fbm_spec():
    return FbmSpec(hurst=0.75, dimension=1, horizon=0.5, grid_size=1025, seed=11)


@pytest.fixture(scope="session")
def fbm_path(fbm_spec):
    return sample_fbm(fbm_spec)


@pytest.fixture(scope="session")
def fbm_path_2d():
    return sample_fbm(FbmSpec(hurst=0.75, dimension=2, horizon=0.5, grid_size=1025, seed=5))


@pytest.fixture
def linear_path():
    """y_t = t on [0, 1]"""
    return smooth_path("linear", [1.0], 1.0, 257)


@pytest.fixture
def scalar_linear_system():
    """dX = X dy, x0 = 1"""
    return JetSystem(1, [ZeroField(1), AffineField([[1.0]])], [1.0])


@pytest.fixture
def polynomial_system():
    """Two-dimensional polynomial fields driven by two components"""
    drift = PolynomialField([[(0.5, (0, 1))], [(-0.2, (1, 0))]])
    first = PolynomialField([[(1.0, (0, 0)), (0.3, (0, 2))], [(0.5, (1, 1))]])
    second = PolynomialField([[(0.2, (1, 0))], [(1.0, (0, 0)), (-0.4, (2, 0))]])
    return JetSystem(2, [drift, first, second], np.array([0.5, -0.3]))
