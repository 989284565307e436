import math

import pytest

from segflow.domain_grid import build_grid
from segflow.errors import ConfigurationError, DomainError, UsageError
from segflow.partition_oracle import (
    brute_force_partition_1d,
    optimal_partition_1d,
    optimal_partition_2d_search,
    rectangle_eigenvalue,
)

PI2 = math.pi ** 2


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_equal_split_objective(m):
    result = optimal_partition_1d(1.0, m)
    assert result.objective == pytest.approx(m ** 3 * PI2)
    assert result.description["cuts"] == pytest.approx([k / m for k in range(1, m)])


def test_equal_split_rejects_bad_input():
    with pytest.raises(DomainError):
        optimal_partition_1d(0.0, 2)
    with pytest.raises(DomainError):
        optimal_partition_1d(1.0, 0)


def test_brute_force_finds_the_equal_split():
    result = brute_force_partition_1d(2.0, 3, samples=60)
    assert result.description["cuts"] == pytest.approx([2.0 / 3, 4.0 / 3])
    assert result.objective == pytest.approx(optimal_partition_1d(2.0, 3).objective)


def test_rectangle_eigenvalue():
    assert rectangle_eigenvalue(0.5, 1.0) == pytest.approx(5 * PI2)
    with pytest.raises(DomainError):
        rectangle_eigenvalue(0.0, 1.0)


def test_line_search_on_the_square_picks_the_midline():
    grid = build_grid(2, [1.0, 1.0], [17, 17])
    result = optimal_partition_2d_search(grid, 2)
    assert result.description["axis"] in ("x", "y")
    assert result.description["position"] == pytest.approx(0.5)
    assert result.objective == pytest.approx(10 * PI2, rel=0.03)
    assert result.to_dict()["eigvals"] == pytest.approx(list(result.eigvals))


def test_cross_search_on_a_rectangle():
    grid = build_grid(2, [2.0, 1.0], [17, 9])
    result = optimal_partition_2d_search(grid, 4)
    assert result.description["position"] == pytest.approx([1.0, 0.5])
    assert result.objective == pytest.approx(4 * rectangle_eigenvalue(1.0, 0.5), rel=0.08)


def test_line_search_validates_its_arguments(square_grid, line_grid):
    with pytest.raises(ConfigurationError):
        optimal_partition_2d_search(square_grid, 2, family="curves")
    with pytest.raises(ConfigurationError):
        optimal_partition_2d_search(square_grid, 2, stride=0)
    with pytest.raises(DomainError):
        optimal_partition_2d_search(square_grid, 3)
    with pytest.raises(UsageError):
        optimal_partition_2d_search(line_grid, 2)
