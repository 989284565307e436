import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from segflow.domain_grid import ScalarField
from segflow.errors import (
    ConfigurationError,
    DegenerateComponentError,
    InvalidInitialDataError,
    RangeError,
    UsageError,
)
from segflow.flow_solver import (
    FlowParams,
    Trajectory,
    clamp_stage_dt,
    energy_increase_by_stage,
    grad_sq_density,
    epsilon_continuation,
    lambda_eps,
    make_state,
    penalty_F,
    run_flow,
    segregation_integral,
    stable_dt,
    step,
)


def discrete_ground_eigenvalue(h):
    return 2.0 / h ** 2 * (1.0 - math.cos(math.pi * h))


def test_params_validate_inputs():
    with pytest.raises(ConfigurationError):
        FlowParams(epsilon=0.0, dt=1e-3, t_end=1.0, m=1, c=(1.0,))
    with pytest.raises(ConfigurationError):
        FlowParams(epsilon=1.0, dt=1e-3, t_end=1.0, m=2, c=(1.0,))
    with pytest.raises(ConfigurationError):
        FlowParams(epsilon=1.0, dt=1e-3, t_end=1.0, m=1, c=(1.0,), theta=0.3)


def test_one_component_flow_reaches_the_ground_state(tent_data, one_component_params, line_grid):
    traj = run_flow(tent_data, one_component_params, snapshot_stride=50)
    lam = traj.series["lambda_1"].to_numpy()
    assert lam[-1] == pytest.approx(discrete_ground_eigenvalue(line_grid.spacing[0]), rel=1e-6)
    assert np.all(np.diff(lam[10:]) <= 1e-6 * lam[11:])


def test_constraint_is_exact_at_every_step(two_phase_data, two_phase_params):
    traj = run_flow(two_phase_data, two_phase_params)
    assert traj.series["constraint_error"].max() <= 1e-10
    for state in traj.snapshots:
        norms = np.sum(state.u ** 2 * state.grid.quad_weight, axis=(1,))
        assert norms == pytest.approx([1.0, 1.0], rel=1e-10)


def test_total_energy_never_increases(two_phase_data, two_phase_params):
    traj = run_flow(two_phase_data, two_phase_params)
    assert traj.max_energy_increase <= 1e-8
    assert max(energy_increase_by_stage(traj.series).values()) <= 1e-8


def test_step_keeps_values_nonnegative_and_advances_time(two_phase_data, two_phase_params, line_grid):
    u = np.stack([g.values for g in two_phase_data])
    state = make_state(line_grid, u, 0.0, two_phase_params)
    new = step(state, two_phase_params)
    assert new.t == pytest.approx(two_phase_params.dt)
    assert new.step_index == 1
    assert np.all(new.u >= 0)
    assert np.all(new.u[:, 0] == 0) and np.all(new.u[:, -1] == 0)


def test_multipliers_include_the_coupling_term(line_grid):
    x = line_grid.axis(0)
    bump = np.where(line_grid.interior_mask, np.sin(math.pi * x), 0.0)
    u = np.stack([bump, bump]) / math.sqrt(0.5)
    params = FlowParams(epsilon=0.5, dt=1e-3, t_end=1.0, m=2, c=(1.0, 1.0))
    state = make_state(line_grid, u, 0.0, params)
    coupling = 2.0 / 0.25 * float(np.sum(u[0] ** 2 * u[1] ** 2 * line_grid.quad_weight))
    assert lambda_eps(state, params)[0] == pytest.approx(discrete_ground_eigenvalue(0.02) + coupling, rel=1e-6)
    F = penalty_F([ScalarField(line_grid, v) for v in u], 0.5)
    assert state.penalty_energy == pytest.approx(2.0 * float(np.sum(F.values * line_grid.quad_weight)))


def test_time_is_pinned_to_the_step_grid(tent_data, one_component_params):
    params = replace(one_component_params, dt=0.003, t_end=0.3)
    traj = run_flow(tent_data, params, snapshot_stride=7)
    series = traj.series
    assert series["t"].to_numpy() == pytest.approx(series["step"].to_numpy() * 0.003, abs=1e-15)
    assert traj.final.t == pytest.approx(0.3)


def test_strides_thin_snapshots_and_series(tent_data, one_component_params):
    params = replace(one_component_params, t_end=0.1)
    traj = run_flow(tent_data, params, snapshot_stride=25, series_stride=10)
    assert [s.step_index for s in traj.snapshots] == [0, 25, 50, 75, 100]
    assert list(traj.series["step"]) == list(range(0, 101, 10))


def test_overlapping_initial_data_is_rejected(two_phase_data, two_phase_params, line_grid):
    mixed = ScalarField(line_grid, (two_phase_data[0].values + two_phase_data[1].values) / math.sqrt(2.0))
    with pytest.raises(InvalidInitialDataError):
        run_flow([mixed, two_phase_data[1]], two_phase_params)
    with pytest.raises(UsageError):
        run_flow(two_phase_data[:1], two_phase_params)


def test_continuation_needs_a_strictly_decreasing_schedule(two_phase_data, two_phase_params):
    with pytest.raises(ConfigurationError):
        epsilon_continuation(two_phase_data, two_phase_params, [0.1, 0.1])
    with pytest.raises(ConfigurationError):
        epsilon_continuation(two_phase_data, two_phase_params, [0.1, 0.05], stage_durations=[0.05])


def test_continuation_scales_dt_with_epsilon_squared(two_phase_data, two_phase_params):
    traj = epsilon_continuation(
        two_phase_data, two_phase_params, [0.1, 0.05], stage_durations=[0.02, 0.01], snapshot_stride=1000
    )
    stages = pd.DataFrame(traj.stages)
    assert list(stages["epsilon"]) == [0.1, 0.05]
    assert stages["dt"].tolist() == pytest.approx([2e-4, 5e-5])
    assert stages["t_end"].iloc[-1] == pytest.approx(0.03)
    assert set(traj.series["stage"]) == {0, 1}
    assert traj.final.epsilon == 0.05


def test_single_stage_continuation_matches_run_flow(two_phase_data, two_phase_params):
    params = replace(two_phase_params, t_end=0.01)
    a = run_flow(two_phase_data, params)
    b = epsilon_continuation(two_phase_data, params, [params.epsilon])
    assert np.array_equal(a.final.u, b.final.u)
    pd.testing.assert_frame_equal(a.series, b.series)


def test_segregation_integral_range_checks(two_phase_data, two_phase_params):
    traj = run_flow(two_phase_data, replace(two_phase_params, t_end=0.01))
    assert segregation_integral(traj, 0.005, 0.005) == 0.0
    assert segregation_integral(traj, 0.0, 0.01) >= 0.0
    with pytest.raises(RangeError):
        segregation_integral(traj, 0.0, 1.0)
    with pytest.raises(RangeError):
        segregation_integral(traj, 0.01, 0.0)


def test_stable_dt_cap():
    assert stable_dt(0.1, 2.0) == pytest.approx(0.25 * 0.01 / 4.0)
    assert stable_dt(0.1, 0.0) == math.inf


def test_trajectory_times_must_increase(line_grid):
    fields = [np.zeros((1,) + line_grid.counts)] * 2
    traj = Trajectory.from_fields(line_grid, [0.0, 1.0], fields)
    with pytest.raises(UsageError):
        traj.append(traj.snapshots[0])


def test_field_at_interpolates_linearly_in_time(line_grid):
    fields = [np.full((1,) + line_grid.counts, v) for v in (0.0, 2.0)]
    traj = Trajectory.from_fields(line_grid, [0.0, 1.0], fields)
    assert np.allclose(traj.field_at(0.25), 0.5)
    with pytest.raises(RangeError):
        traj.field_at(1.5)


def test_energy_increase_by_stage_ignores_stage_boundaries():
    series = pd.DataFrame({"stage": [0, 0, 1, 1], "total_energy": [10.0, 9.0, 12.0, 11.0]})
    assert energy_increase_by_stage(series) == {0: 0.0, 1: 0.0}
    series.loc[3, "total_energy"] = 12.6
    assert energy_increase_by_stage(series)[1] == pytest.approx(0.05)


def test_gradient_density_of_a_linear_field(line_grid):
    density = grad_sq_density(ScalarField(line_grid, 3.0 * line_grid.axis(0)))
    assert density.values[1:-1] == pytest.approx(9.0)
    assert density.values[0] == 0.0 and density.values[-1] == 0.0


def test_stage_dt_is_clamped_to_the_stability_cap(two_phase_data, two_phase_params):
    params = replace(two_phase_params, dt=1e-3)
    traj = epsilon_continuation(two_phase_data, params, [0.1, 0.05], stage_durations=[0.01, 0.005], snapshot_stride=1000)
    stages = pd.DataFrame(traj.stages)
    assert (stages["dt"] <= stages["dt_cap"] * (1 + 1e-12)).all()
    assert stages["dt"].iloc[0] < 1e-3
    steps = (stages["t_end"] - stages["t_start"]) / stages["dt"]
    assert steps.to_numpy() == pytest.approx(np.round(steps.to_numpy()), abs=1e-6)
    assert traj.final.t == pytest.approx(0.015)
    assert max(energy_increase_by_stage(traj.series).values()) <= 1e-8


def test_clamp_leaves_a_stable_dt_alone(two_phase_data, two_phase_params, line_grid):
    u = np.stack([g.values for g in two_phase_data])
    state = make_state(line_grid, u, 0.0, two_phase_params)
    kept, cap = clamp_stage_dt(state, two_phase_params)
    assert kept is two_phase_params
    assert cap == pytest.approx(stable_dt(0.1, float(np.max(u))))
    clamped, _ = clamp_stage_dt(state, replace(two_phase_params, dt=1.0))
    assert clamped.dt <= cap
    assert two_phase_params.t_end / clamped.dt == pytest.approx(round(two_phase_params.t_end / clamped.dt))


def _sine_mode(grid, k):
    x = grid.axis(0)
    return np.where(grid.interior_mask, np.sin(k * math.pi * x), 0.0)


def test_discrete_eigenfunction_is_a_fixed_point_of_step(line_grid, one_component_params):
    u = _sine_mode(line_grid, 1)
    u = (u / math.sqrt(float(np.sum(u ** 2 * line_grid.quad_weight))))[None, :]
    state = make_state(line_grid, u, 0.0, one_component_params)
    assert state.lam[0] == pytest.approx(discrete_ground_eigenvalue(line_grid.spacing[0]), rel=1e-12)
    new = step(state, one_component_params)
    assert np.max(np.abs(new.u - u)) <= 1e-8
    assert new.lam[0] == pytest.approx(state.lam[0], rel=1e-12)


def test_second_mode_decays_at_the_discrete_rate(line_grid):
    h = line_grid.spacing[0]
    phi1, phi2 = _sine_mode(line_grid, 1), _sine_mode(line_grid, 2)
    g = ScalarField(line_grid, phi1 + 0.1 * phi2)
    g = ScalarField(line_grid, g.values / math.sqrt(float(np.sum(g.values ** 2 * line_grid.quad_weight))))
    params = FlowParams(epsilon=1.0, dt=1e-3, t_end=0.1, m=1, c=(1.0,))
    traj = run_flow([g], params, snapshot_stride=20)

    mu = [2.0 / h ** 2 * (1.0 - math.cos(k * math.pi * h)) for k in (1, 2)]
    ratios = [float(s.u[0] @ phi2) / float(s.u[0] @ phi1) for s in traj.snapshots]
    expected = [0.1 * ((1 + params.dt * mu[0]) / (1 + params.dt * mu[1])) ** s.step_index for s in traj.snapshots]
    assert ratios == pytest.approx(expected, rel=1e-8)
    assert np.all(np.diff(ratios) < 0)
    lam = traj.series["lambda_1"].to_numpy()
    assert np.all(np.diff(lam) <= 1e-12 * lam[1:])


def test_vanishing_component_is_degenerate(two_phase_data, two_phase_params, line_grid):
    u = np.stack([two_phase_data[0].values, np.zeros(line_grid.counts)])
    state = make_state(line_grid, u, 0.0, two_phase_params)
    with pytest.raises(DegenerateComponentError) as info:
        step(state, two_phase_params)
    assert info.value.exit_code == 1


def test_mirror_symmetric_data_stays_mirror_symmetric(two_phase_data, two_phase_params):
    traj = run_flow(two_phase_data, replace(two_phase_params, t_end=0.05), snapshot_stride=50)
    for state in traj.snapshots:
        assert np.max(np.abs(state.u[0] - state.u[1][::-1])) <= 1e-8
        assert state.lam[0] == pytest.approx(state.lam[1], rel=1e-8)


def test_segregation_integral_shrinks_with_epsilon(fine_line_grid):
    x = fine_line_grid.axis(0)
    g = []
    for a, b in ((0.0, 0.5), (0.5, 1.0)):
        tent = np.where(fine_line_grid.interior_mask, np.clip(np.minimum(x - a, b - x), 0.0, None), 0.0)
        g.append(ScalarField(fine_line_grid, tent / math.sqrt(float(np.sum(tent ** 2 * fine_line_grid.quad_weight)))))
    totals = []
    for eps in (0.1, 0.03, 0.01):
        params = FlowParams(epsilon=eps, dt=6e-4 * (eps / 0.1) ** 2, t_end=0.02, m=2, c=(1.0, 1.0))
        traj = run_flow(g, params, snapshot_stride=10 ** 6)
        totals.append(segregation_integral(traj, 0.0, 0.02))
    assert totals[0] > totals[1] > totals[2] > 0.0
