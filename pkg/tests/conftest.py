import numpy as np
import pytest

from kg2d.grid import Grid2D
from kg2d.ground_state import ground_state

# frozen from tests/oracles.py (fixed-step RK4 multisection shooting)
B_ORACLE = 2.2062008646508344
M_ORACLE = 11.700896524556025


@pytest.fixture(scope="session")
def profile():
    return ground_state()


@pytest.fixture
def grid64():
    return Grid2D(64, 20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gaussian(grid, width=1.0, center=(0.0, 0.0), amp=1.0):
    X, Y = grid.mesh
    return amp * np.exp(-((X - center[0]) ** 2 + (Y - center[1]) ** 2) / (2 * width**2))
