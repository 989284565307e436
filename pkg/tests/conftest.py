import math

import numpy as np
import pytest

from segflow.domain_grid import ScalarField, build_grid, integrate
from segflow.flow_solver import FlowParams


def normalized(grid, values, c=1.0):
    values = np.where(grid.interior_mask, values, 0.0)
    norm = math.sqrt(integrate(ScalarField(grid, values ** 2)))
    return ScalarField(grid, values * (c / norm))


def tent(x, a, b):
    return np.clip(np.minimum(x - a, b - x), 0.0, None)


@pytest.fixture
def line_grid():
    return build_grid(1, [1.0], [51])


@pytest.fixture
def fine_line_grid():
    return build_grid(1, [1.0], [201])


@pytest.fixture
def square_grid():
    return build_grid(2, [1.0, 1.0], [17, 17])


@pytest.fixture
def tent_data(line_grid):
    return [normalized(line_grid, tent(line_grid.axis(0), 0.0, 1.0))]


@pytest.fixture
def two_phase_data(line_grid):
    x = line_grid.axis(0)
    return [normalized(line_grid, tent(x, 0.0, 0.5)), normalized(line_grid, tent(x, 0.5, 1.0))]


@pytest.fixture
def one_component_params():
    return FlowParams(epsilon=1.0, dt=1e-3, t_end=0.5, m=1, c=(1.0,))


@pytest.fixture
def two_phase_params():
    return FlowParams(epsilon=0.1, dt=2e-4, t_end=0.1, m=2, c=(1.0, 1.0))
