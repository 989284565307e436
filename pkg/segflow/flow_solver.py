"""Time integration of the penalized, L2-constrained segregating heat flow.

One step: explicit reaction (multiplier and penalty), theta-implicit diffusion,
optional clipping of negatives, renormalization of every component to its
constraint value. Renormalization last keeps the constraint exact at every step.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.integrate import trapezoid
from scipy.sparse.linalg import splu

from .debug_utils import debug_print
from .domain_grid import ScalarField, interior_laplacian
from .errors import (
    ConfigurationError,
    DegenerateComponentError,
    InvalidInitialDataError,
    NumericalError,
    RangeError,
    UsageError,
)
from .sigma_space import DEFAULT_TOL, validate_initial

logger = logging.getLogger(__name__)

DEFAULT_KAPPA = 0.25


@dataclass(frozen=True)
class FlowParams:
    epsilon: float
    dt: float
    t_end: float
    m: int
    c: tuple
    theta: float = 1.0
    clip_negative: bool = True
    kappa: float = DEFAULT_KAPPA
    defect_threshold: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}", field="flow.epsilon")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}", field="flow.dt")
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}", field="flow.t_end")
        if self.m < 1:
            raise ConfigurationError(f"m must be at least 1, got {self.m}", field="flow.m")
        if len(self.c) != self.m:
            raise ConfigurationError(f"c needs {self.m} entries, got {len(self.c)}", field="flow.c")
        if any(not cj > 0 for cj in self.c):
            raise ConfigurationError(f"c must be positive, got {list(self.c)}", field="flow.c")
        if not 0.5 <= self.theta <= 1.0:
            raise ConfigurationError(f"theta must lie in [0.5, 1], got {self.theta}", field="flow.theta")


@dataclass(frozen=True, eq=False)
class FlowState:
    grid: object
    u: np.ndarray
    t: float
    lam: tuple
    dirichlet_energy: float
    penalty_energy: float
    epsilon: float
    step_index: int = 0
    stage: int = 0
    clip_mass: float = 0.0

    @property
    def m(self):
        return self.u.shape[0]

    @property
    def total_energy(self):
        return self.dirichlet_energy + self.penalty_energy

    def component(self, j):
        return ScalarField(self.grid, self.u[j])

    def components(self):
        return [self.component(j) for j in range(self.m)]


def stack_components(u):
    """Return (grid, stacked array) from a list of ScalarFields."""
    if isinstance(u, FlowState):
        return u.grid, u.u
    u = list(u)
    if not u:
        raise UsageError("no components given")
    grid = u[0].grid
    if any(not f.grid.same_as(grid) for f in u):
        raise UsageError("components live on different grids")
    return grid, np.stack([f.values for f in u])


def grad_sq_density(u_j):
    """Central-difference |grad u_j|^2 on interior nodes, 0 elsewhere."""
    grid = u_j.grid
    density = np.zeros(grid.counts)
    for a in range(grid.dim):
        density += np.gradient(u_j.values, grid.spacing[a], axis=a) ** 2
    return ScalarField(grid, np.where(grid.interior_mask, density, 0.0))


def penalty_density(u, epsilon):
    m = u.shape[0]
    sq = u ** 2
    total = np.zeros(u.shape[1:])
    for i in range(m):
        for j in range(i + 1, m):
            total += sq[i] * sq[j]
    return total / epsilon ** 2


def penalty_F(u, epsilon):
    """Nodewise F = eps^-2 sum_{i<j} u_i^2 u_j^2."""
    grid, stacked = stack_components(u)
    return ScalarField(grid, penalty_density(stacked, epsilon))


def overlap_measure(grid, u):
    """max over pairs j != k of integral(u_j^2 u_k^2)."""
    m = u.shape[0]
    if m < 2:
        return 0.0
    sq = u ** 2
    best = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            best = max(best, float(np.sum(sq[i] * sq[j] * grid.quad_weight)))
    return best


def _ledger(grid, u, epsilon, c):
    """Multipliers, Dirichlet energy and penalty energy of a stacked state."""
    lap, index = interior_laplacian(grid)
    w = grid.cell_volume
    v = u.reshape(u.shape[0], -1)[:, index]
    dirichlet = np.array([-w * float(vj @ (lap @ vj)) for vj in v])
    sq = v ** 2
    cross = sq * (np.sum(sq, axis=0) - sq)
    coupling = 2.0 * w * np.sum(cross, axis=1) / epsilon ** 2
    lam = (dirichlet + coupling) / np.asarray(c) ** 2
    penalty = 2.0 * w * float(np.sum(penalty_density(v, epsilon)))
    return lam, float(np.sum(dirichlet)), penalty


def lambda_eps(state, params):
    """Multipliers (1/c_j^2) integral(|grad u_j|^2 + 2 eps^-2 u_j^2 sum_{i != j} u_i^2)."""
    lam, _, _ = _ledger(state.grid, state.u, params.epsilon, params.c)
    return lam


def make_state(grid, u, t, params, step_index=0, stage=0, clip_mass=0.0):
    """Assemble a FlowState with its multipliers and energy ledger."""
    lam, dirichlet, penalty = _ledger(grid, u, params.epsilon, params.c)
    return FlowState(
        grid=grid,
        u=u,
        t=float(t),
        lam=tuple(float(x) for x in lam),
        dirichlet_energy=dirichlet,
        penalty_energy=penalty,
        epsilon=params.epsilon,
        step_index=step_index,
        stage=stage,
        clip_mass=clip_mass,
    )


def stable_dt(epsilon, umax, kappa=DEFAULT_KAPPA):
    """Penalty stiffness cap kappa * eps^2 / max|u|^2."""
    if umax <= 0:
        return math.inf
    return kappa * epsilon ** 2 / umax ** 2


@lru_cache(maxsize=16)
def _diffusion_solver(key, dt, theta):
    from .domain_grid import _grid_from_key

    grid = _grid_from_key(key)
    lap, _ = interior_laplacian(grid)
    system = (sparse.identity(lap.shape[0], format="csc") - theta * dt * lap).tocsc()
    try:
        return splu(system).solve
    except RuntimeError as e:
        raise NumericalError(f"diffusion system factorization failed: {e}")


def diffusion_solver(grid, dt, theta):
    """Factor (I - theta dt Laplacian) once per (grid, dt, theta) and reuse it."""
    return _diffusion_solver(grid.key, float(dt), float(theta))


def step(state, params):
    """Advance one time step."""
    new_state, _ = _advance(state, params)
    return new_state


def _advance(state, params):
    grid = state.grid
    lap, index = interior_laplacian(grid)
    solve = diffusion_solver(grid, params.dt, params.theta)
    dt, theta, eps = params.dt, params.theta, params.epsilon
    w = grid.cell_volume
    m = state.m

    v = state.u.reshape(m, -1)[:, index]
    lam = np.asarray(state.lam)
    sq = v ** 2
    reaction = lam[:, None] * v - 2.0 * v * (np.sum(sq, axis=0) - sq) / eps ** 2

    rhs = v + dt * reaction
    if theta < 1.0:
        rhs = rhs + dt * (1.0 - theta) * (lap @ v.T).T
    new = np.empty_like(v)
    for j in range(m):
        new[j] = solve(rhs[j])
    if not np.all(np.isfinite(new)):
        raise NumericalError(f"non-finite values after the diffusion solve at t={state.t:.17g}")

    clip_mass = 0.0
    if params.clip_negative:
        negative = np.minimum(new, 0.0)
        clip_mass = -w * float(np.sum(negative))
        new = new - negative

    norms = np.sqrt(w * np.sum(new ** 2, axis=1))
    for j in range(m):
        if not norms[j] > 0 or not math.isfinite(norms[j]):
            raise DegenerateComponentError(j, stage=state.stage, t=state.t)
    new = new * (np.asarray(params.c) / norms)[:, None]

    u = np.zeros((m, grid.size))
    u[:, index] = new
    u = u.reshape((m,) + tuple(grid.counts))
    new_state = make_state(
        grid, u, state.t + dt, params, step_index=state.step_index + 1, stage=state.stage, clip_mass=clip_mass
    )

    # Diagnostics from the discrete time derivative
    dudt = (new - v) / dt
    residual = np.asarray(new_state.lam)[:, None] * new - (dudt - (lap @ new.T).T)
    near_zero = new <= params.defect_threshold * np.max(new, axis=1, keepdims=True)
    defect = w * float(np.sum(np.abs(residual) * near_zero))
    pohozaev = w * np.sum(new * (dudt - (lap @ new.T).T), axis=1) - np.asarray(new_state.lam) * w * np.sum(
        new ** 2, axis=1
    )
    diagnostics = {
        "dissipation_increment": dt * w * float(np.sum(dudt ** 2)),
        "defect_mass": defect,
        "pohozaev_residual": float(np.max(np.abs(pohozaev) / np.asarray(params.c) ** 2)),
    }
    return new_state, diagnostics


class Trajectory:
    """Time-ordered snapshots at a stride plus a per-step (or strided) series."""

    def __init__(self, grid, snapshots=None, records=None, columns=None, stages=None, stride=1):
        if stride < 1:
            raise ConfigurationError(f"snapshot stride must be >= 1, got {stride}", field="flow.snapshot_stride")
        self.grid = grid
        self.snapshots = []
        self.stride = stride
        self.stages = list(stages or [])
        self._records = list(records or [])
        self._columns = list(columns or [])
        self.max_energy_increase = 0.0
        for s in snapshots or []:
            self.append(s)

    def append(self, state):
        if self.snapshots and not state.t > self.snapshots[-1].t:
            raise UsageError(f"snapshot times must increase strictly ({state.t} after {self.snapshots[-1].t})")
        self.snapshots.append(state)

    @classmethod
    def from_fields(cls, grid, times, fields, epsilon=1.0):
        """Wrap externally computed fields (shape (T, m, *counts)) as a trajectory."""
        snapshots = []
        records = []
        for k, (t, u) in enumerate(zip(times, fields)):
            u = np.asarray(u, dtype=float)
            snapshots.append(FlowState(grid, u, float(t), tuple([0.0] * u.shape[0]), 0.0, 0.0, epsilon, step_index=k))
            records.append([k, float(t)])
        return cls(grid, snapshots, records=records, columns=["step", "t"])

    @property
    def series(self):
        return pd.DataFrame.from_records(self._records, columns=self._columns)

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    @property
    def initial(self):
        return self.snapshots[0]

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def m(self):
        return self.snapshots[0].m

    def field_at(self, t):
        """Stacked field at time t, linear in time between snapshots."""
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise RangeError(f"time {t} outside trajectory range [{times[0]}, {times[-1]}]")
        k = int(np.searchsorted(times, t, side="right"))
        if k == 0:
            return self.snapshots[0].u.copy()
        if k >= len(times):
            return self.snapshots[-1].u.copy()
        t0, t1 = times[k - 1], times[k]
        s = (t - t0) / (t1 - t0)
        return (1.0 - s) * self.snapshots[k - 1].u + s * self.snapshots[k].u

    def epsilon_at(self, t):
        times = self.times
        k = max(int(np.searchsorted(times, t, side="left")), 0)
        return self.snapshots[min(k, len(times) - 1)].epsilon


def _series_columns(m):
    return (
        ["step", "t", "stage", "epsilon"]
        + [f"lambda_{j + 1}" for j in range(m)]
        + [
            "dirichlet_energy",
            "penalty_energy",
            "total_energy",
            "max_overlap",
            "clip_mass",
            "constraint_error",
            "dissipation",
            "energy_residual",
            "defect_mass",
            "pohozaev_residual",
        ]
    )


def _record(state, params, dissipation, energy_start, diagnostics):
    grid = state.grid
    w = grid.quad_weight
    norms = np.array([float(np.sum(state.u[j] ** 2 * w)) for j in range(state.m)])
    c2 = np.asarray(params.c) ** 2
    return (
        [state.step_index, state.t, state.stage, params.epsilon]
        + list(state.lam)
        + [
            state.dirichlet_energy,
            state.penalty_energy,
            state.total_energy,
            overlap_measure(grid, state.u),
            state.clip_mass,
            float(np.max(np.abs(norms - c2) / c2)),
            dissipation,
            state.total_energy + dissipation - energy_start,
            diagnostics.get("defect_mass", 0.0),
            diagnostics.get("pohozaev_residual", 0.0),
        ]
    )


def _step_count(duration, dt):
    ratio = duration / dt
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        n = int(math.ceil(ratio))
    return max(n, 1)


def clamp_stage_dt(state, params):
    """Shrink params.dt to the stability cap at the stage's starting state.

    A clamped step divides the stage duration evenly. Returns (params, cap).
    """
    cap = stable_dt(params.epsilon, float(np.max(np.abs(state.u))), params.kappa)
    if params.dt <= cap:
        return params, cap
    dt = params.t_end / math.ceil(params.t_end / cap)
    logger.info(
        "stage %d: dt=%.3e exceeds the penalty stability cap %.3e at epsilon=%.3e; using dt=%.3e",
        state.stage,
        params.dt,
        cap,
        params.epsilon,
        dt,
    )
    return replace(params, dt=dt), cap


def _run_stage(trajectory, state, params, snapshot_stride, series_stride, include_initial):
    """Integrate one epsilon stage in place on the trajectory; returns the terminal state."""
    n_steps = _step_count(params.t_end, params.dt)
    logger.info(
        "stage %d: epsilon=%.6g dt=%.6g steps=%d from t=%.6g", state.stage, params.epsilon, params.dt, n_steps, state.t
    )

    energy_start = state.total_energy
    dissipation = 0.0
    if include_initial:
        trajectory.append(state)
        trajectory._records.append(_record(state, params, dissipation, energy_start, {}))

    t_start = state.t
    previous_energy = energy_start
    for k in range(1, n_steps + 1):
        new_state, diagnostics = _advance(state, params)
        # Pin the clock to t_start + k dt so long runs do not accumulate drift
        new_state = replace(new_state, t=t_start + k * params.dt)
        dissipation += diagnostics["dissipation_increment"]
        increase = (new_state.total_energy - previous_energy) / max(abs(previous_energy), 1e-300)
        trajectory.max_energy_increase = max(trajectory.max_energy_increase, increase)
        previous_energy = new_state.total_energy
        state = new_state
        if k % series_stride == 0 or k == n_steps:
            trajectory._records.append(_record(state, params, dissipation, energy_start, diagnostics))
        if k % snapshot_stride == 0 or k == n_steps:
            trajectory.append(state)
        if n_steps >= 10 and k % (n_steps // 10) == 0:
            debug_print(f"stage {state.stage}: step {k}/{n_steps} t={state.t:.6g} lambda={state.lam}")
    if state.clip_mass > 1e-12:
        logger.info("stage %d: last-step clipping mass %.3e", state.stage, state.clip_mass)
    return state


def _initial_state(g, params, tol):
    if len(g) != params.m:
        raise UsageError(f"{len(g)} initial components but m={params.m}")
    check = validate_initial(g, params.c, tol)
    if not check.passed:
        raise InvalidInitialDataError(check)
    grid, u0 = stack_components([gj.restricted() for gj in g])
    return make_state(grid, u0, 0.0, params)


def run_flow(g, params, snapshot_stride=1, series_stride=1, tol=DEFAULT_TOL):
    """Run the flow from target-valued initial data g up to t_end."""
    return epsilon_continuation(g, params, [params.epsilon], None, snapshot_stride, series_stride, tol)


def epsilon_continuation(
    g, params, eps_schedule, stage_durations=None, snapshot_stride=1, series_stride=1, tol=DEFAULT_TOL
):
    """Run the flow over a strictly decreasing epsilon schedule, warm-starting each stage.

    Stage k runs for stage_durations[k] (default t_end / len(schedule)) with time step
    dt * (eps_k / eps_0)^2, which tracks the penalty stiffness cap.
    """
    schedule = [float(e) for e in eps_schedule]
    if not schedule:
        raise ConfigurationError("epsilon schedule is empty", field="flow.eps_schedule")
    if any(not b < a for a, b in zip(schedule, schedule[1:])):
        raise ConfigurationError(f"epsilon schedule must be strictly decreasing, got {schedule}", field="flow.eps_schedule")
    if stage_durations is None:
        stage_durations = [params.t_end / len(schedule)] * len(schedule)
    if len(stage_durations) != len(schedule) or any(not d > 0 for d in stage_durations):
        raise ConfigurationError(
            "stage_durations must give one positive duration per epsilon stage", field="flow.stage_durations"
        )
    if series_stride < 1:
        raise ConfigurationError(f"series stride must be >= 1, got {series_stride}", field="flow.series_stride")

    first = replace(params, epsilon=schedule[0], t_end=stage_durations[0])
    state = _initial_state(g, first, tol)
    trajectory = Trajectory(state.grid, columns=_series_columns(params.m), stride=snapshot_stride)

    for k, (eps, duration) in enumerate(zip(schedule, stage_durations)):
        stage_params = replace(params, epsilon=eps, t_end=duration, dt=params.dt * (eps / schedule[0]) ** 2)
        if k > 0:
            check = validate_initial(
                state.components(), params.c, max(tol, 1e-10), check_overlap=False, check_sign=params.clip_negative
            )
            if not check.passed:
                degenerate = [j for j, cj in enumerate(params.c) if check.norm_errors[j] >= cj ** 2 * (1 - 1e-12)]
                if degenerate:
                    raise DegenerateComponentError(degenerate[0], stage=k, t=state.t)
                raise InvalidInitialDataError(check)
            state = make_state(state.grid, state.u, state.t, stage_params, step_index=state.step_index, stage=k)
        stage_params, cap = clamp_stage_dt(state, stage_params)
        t_begin = state.t
        state = _run_stage(trajectory, state, stage_params, snapshot_stride, series_stride, include_initial=(k == 0))
        trajectory.stages.append(
            {"stage": k, "epsilon": eps, "dt": stage_params.dt, "dt_cap": cap, "t_start": t_begin, "t_end": state.t}
        )
    logger.info(
        "flow finished at t=%.6g lambda=%s max relative energy increase %.3e",
        state.t,
        ["%.8g" % x for x in state.lam],
        trajectory.max_energy_increase,
    )
    return trajectory


def segregation_integral(traj, t1, t2):
    """Trapezoidal time integral of integral(F) over [t1, t2] from the recorded series."""
    series = traj.series
    times = series["t"].to_numpy()
    if t1 > t2:
        raise RangeError(f"t1={t1} must not exceed t2={t2}")
    if t1 < times[0] - 1e-12 or t2 > times[-1] + 1e-12:
        raise RangeError(f"[{t1}, {t2}] outside recorded range [{times[0]}, {times[-1]}]")
    if t1 == t2:
        return 0.0
    f_values = 0.5 * series["penalty_energy"].to_numpy()
    inside = (times > t1) & (times < t2)
    ts = np.concatenate([[t1], times[inside], [t2]])
    fs = np.concatenate([[np.interp(t1, times, f_values)], f_values[inside], [np.interp(t2, times, f_values)]])
    return float(trapezoid(fs, ts))


def energy_increase_by_stage(series):
    """Largest relative step-to-step increase of total_energy within each stage."""
    out = {}
    for stage, rows in series.groupby("stage", sort=True):
        energy = rows["total_energy"].to_numpy()
        if len(energy) < 2:
            out[int(stage)] = 0.0
            continue
        increase = np.diff(energy) / np.maximum(np.abs(energy[:-1]), 1e-300)
        out[int(stage)] = float(max(np.max(increase), 0.0))
    return out
