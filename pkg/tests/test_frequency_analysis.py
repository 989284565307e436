import logging
import math

import numpy as np
import pytest

from segflow.domain_grid import ScalarField, build_grid
from segflow.errors import (
    DegenerateProbeError,
    DomainError,
    InsufficientResolutionError,
    RangeError,
    UnsupportedDimensionError,
)
from segflow.flow_solver import Trajectory
from segflow.frequency_analysis import (
    BlowupWindow,
    PointClass,
    arc_eigenvalue,
    blowup_defect,
    blowup_rescale,
    caloric_trajectory,
    classify_point,
    compute_IHN,
    default_radii,
    extrapolate_frequency,
    fit_monotonicity_constant,
    frequency_at,
    gap_constants,
    growth_exponent,
    homogeneity_constant,
    interface_pair,
    probe,
)
from segflow.sigma_space import SigmaPoint

FIXTURE_RADII = [0.3, 0.2, 0.1, 0.05]


@pytest.fixture
def wide_line():
    return build_grid(1, [6.0], [601])


@pytest.fixture
def fixture_times():
    return np.linspace(0.0, 0.1, 11)


@pytest.mark.parametrize("kind, expected", [("linear", 1.0), ("quadratic", 2.0)])
def test_caloric_fixtures_have_integer_frequency(wide_line, fixture_times, kind, expected):
    traj = caloric_trajectory(wide_line, kind, fixture_times)
    result = probe(traj, [3.0], 0.1, FIXTURE_RADII)
    assert result.N_vals == pytest.approx(expected, abs=1e-3)
    assert result.fitted_C == pytest.approx(0.0, abs=1e-3)
    assert result.alpha_hat == pytest.approx(expected, abs=1e-3)
    assert result.growth_alpha == pytest.approx(expected, abs=1e-2)


def test_compute_IHN_closed_form_for_a_linear_slice(wide_line):
    x = wide_line.coordinates()[0]
    field = ScalarField(wide_line, x - 3.0)
    R = 0.2
    I, H, N = compute_IHN([field], SigmaPoint((0.0,)), (3.0,), R)
    # Gaussian moments with variance 2 R^2
    assert H == pytest.approx(2 * R ** 2, rel=1e-4)
    assert I == pytest.approx(R ** 2, rel=1e-4)
    assert N == pytest.approx(1.0, abs=1e-4)


def test_compute_IHN_rejects_vanishing_fields(wide_line):
    zero = ScalarField.zeros(wide_line)
    with pytest.raises(DegenerateProbeError):
        compute_IHN([zero], SigmaPoint((0.0,)), (3.0,), 0.1)
    with pytest.raises(DomainError):
        compute_IHN([zero], SigmaPoint((0.0,)), (3.0,), 0.0)


def test_monotonicity_constant_is_the_least_repair():
    radii = np.array([0.1, 0.2, 0.3])
    N = np.array([1.0, 1.0, 1.0])
    assert fit_monotonicity_constant(radii, N) == 0.0
    N = np.array([1.0, 0.99, 1.0])
    C = fit_monotonicity_constant(radii, N)
    assert C == pytest.approx(0.01 / (0.2 ** 4 - 0.1 ** 4))
    repaired = N + C * radii ** 4
    assert np.all(np.diff(repaired) >= -1e-12)


def test_extrapolation_uses_radii_above_three_cells():
    h = 0.01
    radii = np.array([0.2, 0.1, 0.08, 0.05, 0.04, 0.02])
    N = 1.0 + 5.0 * radii ** 4
    assert extrapolate_frequency(radii, N, h) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InsufficientResolutionError):
        extrapolate_frequency(radii[-3:], N[-3:], h)


def test_growth_exponent_reads_the_power_law():
    radii = np.array([0.1, 0.2, 0.4])
    assert growth_exponent(radii, radii ** 3) == pytest.approx(1.5)
    assert math.isnan(growth_exponent(radii[:1], radii[:1]))


def test_default_radii_are_geometric_down_to_three_cells(line_grid):
    radii = default_radii(line_grid, 0.5)
    assert radii[0] == pytest.approx(0.25)
    assert np.allclose(radii[:-1] / radii[1:], math.sqrt(2.0))
    assert radii[-1] >= 3 * line_grid.min_spacing * (1 - 1e-12)


def test_probe_needs_history_before_the_base(wide_line, fixture_times):
    traj = caloric_trajectory(wide_line, "linear", fixture_times)
    with pytest.raises(RangeError):
        probe(traj, [3.0], 0.0)
    with pytest.raises(RangeError):
        probe(traj, [3.0], 0.1, [0.5])


def test_probe_frame_repairs_monotonicity(wide_line, fixture_times):
    traj = caloric_trajectory(wide_line, "quadratic", fixture_times)
    frame = probe(traj, [3.0], 0.1, FIXTURE_RADII).to_frame()
    assert list(frame.columns) == ["R", "I", "H", "N", "N_plus_CR4"]
    ordered = frame.sort_values("R")["N_plus_CR4"].to_numpy()
    assert np.all(np.diff(ordered) >= -1e-12)


def test_blowups_of_a_linear_field_coincide(wide_line, fixture_times):
    traj = caloric_trajectory(wide_line, "linear", fixture_times)
    window = BlowupWindow(half_width=1.0, t_min=-1.0, t_max=-0.5, n_space=11, n_time=3)
    assert blowup_defect(traj, [3.0], 0.1, 0.2, 0.1, window, alpha=1.0) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(RangeError):
        blowup_defect(traj, [3.0], 0.1, 1.0, 0.1, window)
    with pytest.raises(DomainError):
        BlowupWindow(half_width=1.0, t_min=0.0, t_max=0.5)


def test_gap_constants_closed_form():
    gc = gap_constants(2, 3)
    assert gc.eta == pytest.approx(1.25, abs=1e-12)
    assert gc.delta == pytest.approx(math.sqrt(1.0 + 1.25 / 6.0) - 1.0, abs=1e-12)
    assert homogeneity_constant(2, 1.0 + gc.delta) == pytest.approx(1.0 + gc.eta / 6.0)
    assert arc_eigenvalue(math.pi) == pytest.approx(1.0)
    with pytest.raises(UnsupportedDimensionError):
        gap_constants(3, 3)
    with pytest.raises(DomainError):
        gap_constants(2, 2)


def test_classify_point_thresholds():
    delta = gap_constants(2, 3).delta
    assert classify_point(1.0, delta, 0.02) is PointClass.REGULAR
    assert classify_point(1.2, delta, 0.02) is PointClass.SINGULAR
    assert classify_point(1.0 + delta / 2, delta, 0.02) is PointClass.UNRESOLVED
    assert classify_point(math.nan, delta) is PointClass.UNRESOLVED


def test_probe_on_a_two_component_trajectory_reports_the_interface():
    line_grid = build_grid(1, [1.0], [401])
    x = line_grid.coordinates()[0]
    u = np.stack([np.clip(0.5 - x, 0, None), np.clip(x - 0.5, 0, None)])
    u = np.where(line_grid.interior_mask, u, 0.0)
    traj = Trajectory.from_fields(line_grid, np.linspace(0.0, 0.2, 5), [u] * 5)
    result = probe(traj, [0.5], 0.2, [0.1, 0.07, 0.05])
    assert result.N_vals == pytest.approx(1.0, abs=2e-2)
    assert result.base_value == (0.0, 0.0)


def test_frequency_at_is_the_extrapolated_probe(wide_line, fixture_times):
    traj = caloric_trajectory(wide_line, "quadratic", fixture_times)
    assert frequency_at(traj, [3.0], 0.1, FIXTURE_RADII) == pytest.approx(2.0, abs=1e-3)


def test_blowup_rescale_samples_the_scaled_field(wide_line, fixture_times):
    traj = caloric_trajectory(wide_line, "linear", fixture_times)
    window = BlowupWindow(half_width=1.0, t_min=-1.0, t_max=-0.5, n_space=5, n_time=2)
    sample = blowup_rescale(traj, [3.0], 0.1, 0.2, window)
    assert sample.values.shape == (2, 1, 5)
    assert sample.values[0, 0] == pytest.approx(0.2 * sample.xi, abs=1e-12)
    with pytest.raises(DomainError):
        blowup_rescale(traj, [3.0], 0.1, 0.0, window)


def test_interface_pair_picks_comparable_leaders():
    assert interface_pair([0.117, 0.117]) == (0, 1)
    assert interface_pair([0.0, 0.0]) == (0, 1)
    assert interface_pair([0.2, 0.5, 0.45]) == (1, 2)
    assert interface_pair([1.0, 0.1]) is None
    assert interface_pair([0.3]) is None


def overlapped_trajectory(width=0.02, height=0.05):
    grid = build_grid(1, [1.0], [401])
    x = grid.coordinates()[0]
    layer = height * np.exp(-(((x - 0.5) / width) ** 2))
    u = np.stack([np.clip(0.5 - x, 0, None) + layer, np.clip(x - 0.5, 0, None) + layer])
    u = np.where(grid.interior_mask, u, 0.0)
    return Trajectory.from_fields(grid, np.linspace(0.0, 0.2, 5), [u] * 5)


@pytest.mark.parametrize("x0", [0.5, 0.50125])
def test_interface_frequency_survives_an_overlap_layer(x0, caplog, monkeypatch):
    monkeypatch.setattr(logging.getLogger("segflow"), "propagate", True)
    traj = overlapped_trajectory()
    with caplog.at_level(logging.WARNING, logger="segflow.frequency_analysis"):
        result = probe(traj, [x0], 0.2, [0.1, 0.07, 0.05])
    assert result.interface_pair == (0, 1)
    assert result.base_value == (0.0, 0.0)
    assert result.N_vals == pytest.approx(1.0, abs=2e-2)
    assert "unsegregated" in caplog.text


def test_bulk_points_keep_the_projected_base():
    traj = overlapped_trajectory()
    result = probe(traj, [0.25], 0.2, [0.1, 0.07, 0.05])
    assert result.interface_pair is None
    assert result.base_value == pytest.approx((0.25, 0.0), abs=1e-9)


def test_frequency_is_invariant_under_scaling(wide_line):
    x = wide_line.coordinates()[0] - 3.0
    f = x + x ** 2
    _, _, N = compute_IHN([ScalarField(wide_line, f)], SigmaPoint((0.0,)), (3.0,), 0.2)
    _, _, N3 = compute_IHN([ScalarField(wide_line, 3.0 * f)], SigmaPoint((0.0,)), (3.0,), 0.2)
    assert N3 == pytest.approx(N, rel=1e-12)


def test_frequency_is_invariant_under_parabolic_rescaling(wide_line):
    # Nodes of the half-size grid map onto the nodes of wide_line under x = 3 + 2 (y - 1.5)
    half = build_grid(1, [3.0], [601])
    x = wide_line.coordinates()[0] - 3.0
    y = 2.0 * (half.coordinates()[0] - 1.5)
    _, _, N_wide = compute_IHN([ScalarField(wide_line, x + x ** 2)], SigmaPoint((0.0,)), (3.0,), 0.2)
    _, _, N_half = compute_IHN([ScalarField(half, y + y ** 2)], SigmaPoint((0.0,)), (1.5,), 0.1)
    assert N_half == pytest.approx(N_wide, rel=1e-10)
    assert N_wide != pytest.approx(1.0, abs=1e-3)
