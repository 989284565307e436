import math

import numpy as np
import pytest

from segflow.domain_grid import (
    ScalarField,
    apply_laplacian,
    build_grid,
    dirichlet_form,
    heat_kernel_weight,
    integrate,
    interior_laplacian,
    interpolate_at,
    kernel_normalization_error,
    l2_norm,
    masked_laplacian,
)
from segflow.errors import ConfigurationError, DomainError, RangeError, UsageError


def test_build_grid_spacing_and_interior(line_grid, square_grid):
    assert line_grid.spacing == pytest.approx((0.02,))
    assert line_grid.n_interior == 49
    assert not line_grid.interior_mask[0] and not line_grid.interior_mask[-1]
    assert square_grid.n_interior == 15 * 15


@pytest.mark.parametrize(
    "dim, extents, counts",
    [(3, [1.0, 1.0, 1.0], [5, 5, 5]), (1, [1.0], [2]), (1, [-1.0], [11]), (2, [1.0], [11, 11])],
)
def test_build_grid_rejects_bad_layouts(dim, extents, counts):
    with pytest.raises(ConfigurationError):
        build_grid(dim, extents, counts)


def test_disk_mask_excludes_corners():
    grid = build_grid(2, [1.0, 1.0], [21, 21], geometry="disk-mask")
    assert not grid.interior_mask[1, 1]
    assert grid.interior_mask[10, 10]
    assert grid.distance_to_boundary((0.5, 0.5)) == pytest.approx(0.5)


def test_trapezoid_quadrature_of_constants_and_polynomials(square_grid, line_grid):
    ones = ScalarField(square_grid, np.ones(square_grid.counts))
    assert integrate(ones) == pytest.approx(1.0)
    x = line_grid.axis(0)
    assert integrate(ScalarField(line_grid, x)) == pytest.approx(0.5)


def test_field_shape_must_match_grid(line_grid):
    with pytest.raises(UsageError):
        ScalarField(line_grid, np.zeros(10))


def test_laplacian_is_exact_on_quadratics(square_grid):
    x, y = square_grid.coordinates()
    f = ScalarField(square_grid, x ** 2 + 3 * y ** 2)
    lap = apply_laplacian(f).values
    assert np.allclose(lap[square_grid.interior_mask], 8.0)
    assert np.all(lap[~square_grid.interior_mask] == 0.0)


def test_dirichlet_form_of_sine(fine_line_grid):
    f = ScalarField.from_function(fine_line_grid, lambda x: np.sin(math.pi * x))
    assert l2_norm(f) ** 2 == pytest.approx(0.5, rel=1e-6)
    assert dirichlet_form(f) / l2_norm(f) ** 2 == pytest.approx(math.pi ** 2, rel=1e-3)


def test_masked_laplacian_restricts_to_mask_and_interior(line_grid):
    mask = np.ones(line_grid.counts, dtype=bool)
    lap, index = masked_laplacian(line_grid, mask)
    assert lap.shape == (49, 49)
    assert index[0] == 1 and index[-1] == 49
    full, full_index = interior_laplacian(line_grid)
    assert np.array_equal(full_index, index)


def test_heat_kernel_has_unit_mass_away_from_boundary(square_grid):
    grid = build_grid(2, [2.0, 2.0], [81, 81])
    assert abs(kernel_normalization_error(grid, (1.0, 1.0), 0.01)) < 1e-6
    with pytest.raises(DomainError):
        heat_kernel_weight(grid, (1.0, 1.0), 0.0)
    with pytest.raises(UsageError):
        heat_kernel_weight(grid, (1.0,), 0.01)


def test_interpolation_is_linear_exact_and_range_checked(square_grid):
    x, y = square_grid.coordinates()
    values = 2 * x - y + 0.5
    out = interpolate_at(square_grid, values, [[0.31, 0.77], [0.5, 0.5]])
    assert out == pytest.approx([2 * 0.31 - 0.77 + 0.5, 1.0])
    with pytest.raises(RangeError):
        interpolate_at(square_grid, values, [[1.5, 0.5]])
