"""Long-time behaviour: multiplier plateaus, the limit state and its partition."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.ndimage import binary_erosion
from scipy.sparse.linalg import cg

from .domain_grid import ScalarField, apply_laplacian, dirichlet_form, integrate, masked_laplacian
from .errors import DomainError, NoPlateauError, NumericalError, UsageError
from .flow_solver import stack_components, overlap_measure
from .interface_extraction import support_labels
from .parallel_utils import parallel_map
from .sigma_space import project_sigma_field

logger = logging.getLogger(__name__)

EROSION_CELLS = 2
NON_UNIT_TOL = 1e-8


@dataclass(eq=False)
class PartitionResult:
    supports: list
    eigvals: tuple
    eigfuns: list
    objective: float


@dataclass
class ConvergenceReport:
    t_plateau: float
    lambda_inf: list
    D_series: pd.DataFrame
    stationarity_residual: list
    E_lambda_value: float
    lambda_flow: list = field(default_factory=list)
    support_eigvals: list = field(default_factory=list)
    eig_agreement: float = math.nan
    E_lambda_eigfuns: float = math.nan
    final_overlap: float = 0.0
    non_unit_c: bool = False
    D_nonincreasing: bool = True
    objective: float = math.nan
    oracle_objective: float = None

    def to_dict(self):
        """JSON-ready dict; the D series becomes a list of [t, D] pairs."""
        data = asdict(self)
        data["D_series"] = self.D_series[["t", "D"]].to_numpy().tolist()
        return data


def _series_arrays(lambda_series):
    if isinstance(lambda_series, pd.DataFrame):
        columns = [c for c in lambda_series.columns if c.startswith("lambda_")]
        return lambda_series["t"].to_numpy(dtype=float), lambda_series[columns].to_numpy(dtype=float)
    times, values = lambda_series
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return np.asarray(times, dtype=float), values


def detect_plateau(lambda_series, rel_tol, window):
    """Earliest window-end time after which every trailing window varies by less than rel_tol.

    The variation of a window is max over components of (max - min) / |mean|.
    Returns None when the series has not settled by its last sample.
    """
    times, values = _series_arrays(lambda_series)
    if len(times) == 0:
        raise UsageError("empty multiplier series")
    if not window > 0:
        raise UsageError(f"plateau window must be positive, got {window}")

    eligible = np.flatnonzero(times >= times[0] + window * (1.0 - 1e-12))
    if len(eligible) == 0:
        return None
    starts = np.searchsorted(times, times - window * (1.0 + 1e-12), side="left")

    def settled(i):
        chunk = values[starts[i] : i + 1]
        spread = chunk.max(axis=0) - chunk.min(axis=0)
        scale = np.abs(chunk.mean(axis=0))
        return bool(np.all(spread < rel_tol * np.maximum(scale, 1e-300)))

    plateau = None
    for i in eligible[::-1]:
        if not settled(i):
            break
        plateau = i
    if plateau is None:
        return None
    logger.info("multipliers settled at t=%.6g (rel_tol=%.1e window=%.3g)", times[plateau], rel_tol, window)
    return float(times[plateau])


def dirichlet_eigen(support_mask, grid, tol=1e-10, max_iter=500):
    """First Dirichlet eigenpair on a node mask by inverse power iteration.

    Inner solves use conjugate gradients; the start vector is all ones on the mask.
    The eigenfunction is nonnegative with unit L2 norm.
    """
    lap, index = masked_laplacian(grid, support_mask)
    if len(index) == 0:
        raise DomainError("support mask contains no interior node")
    K = (-lap).tocsr()
    x = np.ones(len(index))
    x /= np.linalg.norm(x)
    lam = float(x @ (K @ x))
    inner_tol = min(1e-12, 1e-2 * tol)

    for iteration in range(1, max_iter + 1):
        y, info = cg(K, x, x0=x / lam, rtol=inner_tol, maxiter=10 * len(index))
        if info < 0:
            raise NumericalError(f"conjugate gradient breakdown in eigen-solve (info={info})", last_iterate=x)
        x = y / np.linalg.norm(y)
        new_lam = float(x @ (K @ x))
        converged = abs(new_lam - lam) <= tol * new_lam
        lam = new_lam
        if converged:
            break
    else:
        raise NumericalError(f"inverse iteration did not converge in {max_iter} iterations", last_iterate=x)

    values = np.zeros(grid.size)
    values[index] = x
    values = values.reshape(grid.counts)
    if values.sum() < 0:
        values = -values
    values = np.abs(values)
    norm = math.sqrt(integrate(ScalarField(grid, values ** 2)))
    logger.debug("dirichlet_eigen: %d nodes, lambda=%.10g after %d iterations", len(index), lam, iteration)
    return lam, ScalarField(grid, values / norm)


def l2_defect_series(traj, u_inf):
    """D(t) = integral |u(t) - u_inf|^2 at every snapshot."""
    _, target = stack_components(u_inf) if not isinstance(u_inf, np.ndarray) else (traj.grid, u_inf)
    if target.shape != traj.final.u.shape:
        raise UsageError(f"limit field shape {target.shape} does not match trajectory {traj.final.u.shape}")
    w = traj.grid.quad_weight
    rows = [(s.t, float(np.sum((s.u - target) ** 2 * w))) for s in traj.snapshots]
    return pd.DataFrame(rows, columns=["t", "D"])


def evaluate_E_lambda(v, partition):
    """E(v) = sum_j (Dirichlet energy of v_j - lambda_1(Omega_j) integral v_j^2)."""
    grid, stacked = stack_components(v)
    if len(stacked) != len(partition.eigvals):
        raise UsageError(f"{len(stacked)} fields for a partition with {len(partition.eigvals)} regions")
    total = 0.0
    for vj, lam in zip(stacked, partition.eigvals):
        f = ScalarField(grid, vj)
        total += dirichlet_form(f) - lam * integrate(ScalarField(grid, vj ** 2))
    return total


def stationarity_residual(grid, u_j, lam, support):
    """Scaled L2 norm of Laplacian u_j + lam u_j, 2 cells inside the support."""
    core = binary_erosion(support & grid.interior_mask, iterations=EROSION_CELLS)
    if not core.any():
        return math.nan
    f = ScalarField(grid, u_j)
    residual = apply_laplacian(f).values + lam * u_j
    w = grid.quad_weight
    num = math.sqrt(float(np.sum(residual[core] ** 2 * w[core])))
    den = lam * math.sqrt(float(np.sum(u_j[core] ** 2 * w[core])))
    return num / den if den > 0 else math.inf


def plateau_multipliers(traj, t_plateau):
    """Last recorded multipliers at or after t_plateau; the final snapshot's when no series exists."""
    series = traj.series
    columns = [c for c in series.columns if c.startswith("lambda_")]
    if columns:
        settled = series[series["t"] >= t_plateau - 1e-12]
        if not settled.empty:
            return [float(x) for x in settled[columns].iloc[-1]]
    return [float(x) for x in traj.final.lam]


def stage_end_multipliers(traj):
    """(epsilon, multipliers) recorded at the end of every continuation stage."""
    series = traj.series
    columns = [c for c in series.columns if c.startswith("lambda_")]
    if not columns or "stage" not in series.columns:
        return []
    ends = []
    for stage in traj.stages:
        rows = series[series["stage"] == stage["stage"]]
        if not rows.empty:
            ends.append((float(stage["epsilon"]), rows[columns].iloc[-1].to_numpy(dtype=float)))
    return ends


def epsilon_limit_multipliers(traj, lam_final):
    """Multipliers extrapolated to epsilon = 0 along lambda = lambda_0 + b sqrt(epsilon).

    Uses the last two stages, with lam_final standing for the last one. A single
    stage, a single component or multipliers that do not rise as epsilon falls
    leave lam_final unchanged.
    """
    ends = stage_end_multipliers(traj)
    lam_final = np.asarray(lam_final, dtype=float)
    if traj.m < 2 or len(ends) < 2:
        return [float(x) for x in lam_final]
    (eps_prev, lam_prev), (eps_last, _) = ends[-2], ends[-1]
    if np.any(lam_prev >= lam_final):
        logger.warning(
            "multipliers did not rise from epsilon=%.3g to %.3g; reporting the final-stage values", eps_prev, eps_last
        )
        return [float(x) for x in lam_final]
    s_prev, s_last = math.sqrt(eps_prev), math.sqrt(eps_last)
    limit = lam_final + (lam_final - lam_prev) * s_last / (s_prev - s_last)
    return [float(x) for x in limit]


def extract_limit(traj, t_plateau, threshold=None, oracle_objective=None, c=None):
    """Partition of the final snapshot and the report checking the eigenfunction limit.

    lambda_flow holds the settled flow multipliers of the last stage and lambda_inf
    their epsilon -> 0 extrapolation over the continuation stages. Each region is the
    component's label set with the interface band removed, so neighbouring regions
    are separated by Dirichlet nodes. `c` defaults to the L2 norms of the final snapshot.
    """
    if t_plateau is None:
        raise NoPlateauError("multipliers have not settled; the limit cannot be extracted")
    grid = traj.grid
    final = traj.final
    u_inf = project_sigma_field(final.u)
    fields = [ScalarField(grid, uj) for uj in u_inf]
    m = len(fields)

    labels = support_labels(fields, threshold)
    supports = [labels.labels == j + 1 for j in range(m)]
    for j in range(m):
        if not supports[j].any():
            raise DomainError(f"component {j + 1} has no support in the limit state")

    if c is None:
        c = [math.sqrt(integrate(ScalarField(grid, uj ** 2))) for uj in final.u]
    lambda_flow = plateau_multipliers(traj, t_plateau)
    lambda_inf = epsilon_limit_multipliers(traj, lambda_flow)
    residuals = [stationarity_residual(grid, u_inf[j], lambda_flow[j], supports[j]) for j in range(m)]

    eigen = parallel_map(lambda mask: dirichlet_eigen(mask, grid), supports)
    partition = PartitionResult(
        supports=supports,
        eigvals=tuple(lam for lam, _ in eigen),
        eigfuns=[f for _, f in eigen],
        objective=float(sum(lam for lam, _ in eigen)),
    )

    D_series = l2_defect_series(traj, u_inf)
    late = D_series[D_series["t"] >= 0.5 * t_plateau]["D"].to_numpy()
    D_nonincreasing = bool(np.all(np.diff(late) <= 1e-6)) if len(late) > 1 else True

    eig_agreement = max(abs(a - b) / b for a, b in zip(lambda_inf, partition.eigvals))
    report = ConvergenceReport(
        t_plateau=float(t_plateau),
        lambda_inf=[float(x) for x in lambda_inf],
        D_series=D_series,
        stationarity_residual=[float(r) for r in residuals],
        E_lambda_value=evaluate_E_lambda(fields, partition),
        lambda_flow=lambda_flow,
        support_eigvals=[float(x) for x in partition.eigvals],
        eig_agreement=float(eig_agreement),
        E_lambda_eigfuns=evaluate_E_lambda(partition.eigfuns, partition),
        final_overlap=overlap_measure(grid, final.u),
        non_unit_c=bool(np.any(np.abs(np.asarray(c, dtype=float) - 1.0) > NON_UNIT_TOL)),
        D_nonincreasing=D_nonincreasing,
        objective=partition.objective,
        oracle_objective=oracle_objective,
    )
    if report.non_unit_c:
        logger.warning("constraint values differ from 1; the eigenfunction limit is not covered for this case")
    logger.info(
        "limit: lambda_inf=%s support eigenvalues=%s agreement=%.3e",
        ["%.8g" % x for x in lambda_inf],
        ["%.8g" % x for x in partition.eigvals],
        eig_agreement,
    )
    return partition, report
