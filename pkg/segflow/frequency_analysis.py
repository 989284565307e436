"""Gaussian-weighted frequency functionals I, H, N and what is built on them.

For a base point (x0, t0) and radius R the slice t0 - R^2 is weighted by the
backward heat kernel with lag R^2 centred at x0; fields are extended by 0 outside
the domain, which on the grid means the full bounding box is integrated.
"""

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .domain_grid import ScalarField, heat_kernel_weight, integrate, interpolate_at
from .errors import (
    DegenerateProbeError,
    DomainError,
    InsufficientResolutionError,
    RangeError,
    UnsupportedDimensionError,
)
from .flow_solver import penalty_density, stack_components, grad_sq_density
from .parallel_utils import parallel_map
from .sigma_space import SigmaPoint, d_sigma_sq_field, project_sigma

logger = logging.getLogger(__name__)

TOL_H_RELATIVE = 1e-14
RADIUS_RATIO = math.sqrt(2.0)
MIN_RADIUS_CELLS = 3
FIT_POINTS = 4
INTERFACE_RATIO = 0.5
OVERLAP_WARN = 0.05


@dataclass
class FrequencyProbe:
    base: tuple
    radii: np.ndarray
    I_vals: np.ndarray
    H_vals: np.ndarray
    N_vals: np.ndarray
    fitted_C: float
    alpha_hat: float = math.nan
    growth_alpha: float = math.nan
    R0: float = math.nan
    base_value: tuple = ()
    include_penalty: bool = False
    interface_pair: tuple = None

    def to_frame(self):
        """One row per radius, for the probe CSV."""
        return pd.DataFrame(
            {
                "R": self.radii,
                "I": self.I_vals,
                "H": self.H_vals,
                "N": self.N_vals,
                "N_plus_CR4": self.N_vals + self.fitted_C * self.radii ** 4,
            }
        )


@dataclass(frozen=True)
class GapConstants:
    n: int
    d: int
    eta: float
    delta: float


class PointClass(enum.Enum):
    REGULAR = "Regular"
    SINGULAR = "Singular"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class BlowupWindow:
    """Sampling window in blow-up coordinates: [-half_width, half_width]^n x [t_min, t_max]."""

    half_width: float
    t_min: float = -1.0
    t_max: float = -1.0
    n_space: int = 21
    n_time: int = 1

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError(f"window half width must be positive, got {self.half_width}")
        if self.t_max > 0 or self.t_min > self.t_max:
            raise DomainError(f"window times must satisfy t_min <= t_max <= 0, got [{self.t_min}, {self.t_max}]")
        if self.n_space < 2 or self.n_time < 1:
            raise DomainError("window needs at least 2 space samples and 1 time sample")

    def space_axis(self):
        return np.linspace(-self.half_width, self.half_width, self.n_space)

    def time_axis(self):
        return np.linspace(self.t_min, self.t_max, self.n_time)


@dataclass
class BlowupSample:
    rho: float
    xi: np.ndarray
    s: np.ndarray
    values: np.ndarray
    cell: float = field(default=1.0)


def compute_IHN(field_at_slice, base_value, x0, R, epsilon=None, tol_H=None):
    """I, H and N = 2I/H of one time slice at scale R.

    With epsilon given, I also carries the penalty term 2F (the penalized frequency).
    """
    grid, u = stack_components(field_at_slice)
    if not R > 0:
        raise DomainError(f"radius must be positive, got {R}")
    G = heat_kernel_weight(grid, x0, R * R).values

    grad = sum(grad_sq_density(ScalarField(grid, uj)).values for uj in u)
    if epsilon is not None:
        grad = grad + 2.0 * penalty_density(u, epsilon)
    I = R * R * integrate(ScalarField(grid, grad * G))
    H = integrate(ScalarField(grid, d_sigma_sq_field(u, base_value) * G))

    if tol_H is None:
        tol_H = TOL_H_RELATIVE * max(float(np.max(np.abs(u))), 1e-300) ** 2
    if not H > tol_H:
        raise DegenerateProbeError(f"H={H:.3e} <= {tol_H:.3e} at R={R:.6g}: the field vanishes near the base")
    return I, H, 2.0 * I / H


def fit_monotonicity_constant(radii, N_vals):
    """Least C >= 0 making N(R) + C R^4 nondecreasing on the sampled radii."""
    order = np.argsort(radii)
    r4 = np.asarray(radii, dtype=float)[order] ** 4
    n = np.asarray(N_vals, dtype=float)[order]
    C = 0.0
    for a in range(len(r4) - 1):
        span = r4[a + 1] - r4[a]
        if span > 0:
            C = max(C, -(n[a + 1] - n[a]) / span)
    return float(C)


def extrapolate_frequency(radii, N_vals, h, n_fit=FIT_POINTS):
    """Intercept of N against R^4 over the smallest radii at least 3h."""
    radii = np.asarray(radii, dtype=float)
    N_vals = np.asarray(N_vals, dtype=float)
    usable = radii >= MIN_RADIUS_CELLS * h * (1.0 - 1e-12)
    if usable.sum() < 3:
        raise InsufficientResolutionError(
            f"only {int(usable.sum())} radii at or above {MIN_RADIUS_CELLS}h={MIN_RADIUS_CELLS * h:.3g}; need 3"
        )
    r = radii[usable]
    n = N_vals[usable]
    pick = np.argsort(r)[:n_fit]
    if len(pick) < 2 or np.ptp(r[pick] ** 4) == 0:
        return float(np.mean(n[pick]))
    _, intercept = np.polyfit(r[pick] ** 4, n[pick], 1)
    return float(intercept)


def growth_exponent(radii, H_vals):
    """Half the slope of log H against log R."""
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(radii), np.log(np.asarray(H_vals, dtype=float)), 1)
    return float(0.5 * slope)


def parabolic_radius(traj, x0, t0):
    """R0: the smaller of the distance to the spatial boundary and sqrt(t0 - t_first)."""
    t_first = traj.times[0]
    if t0 <= t_first:
        return 0.0
    return min(traj.grid.distance_to_boundary(x0), math.sqrt(t0 - t_first))


def default_radii(grid, R0):
    """Geometric radii with ratio sqrt(2) from R0/2 down to 3h."""
    floor = MIN_RADIUS_CELLS * grid.min_spacing
    radii = []
    R = 0.5 * R0
    while R >= floor * (1.0 - 1e-12):
        radii.append(R)
        R /= RADIUS_RATIO
    return np.array(radii)


def values_at(traj, x0, t0):
    """Interpolated component values at (x0, t0)."""
    u = traj.field_at(t0)
    return np.array([float(interpolate_at(traj.grid, uj, [x0])[0]) for uj in u])


def interface_pair(values, ratio=INTERFACE_RATIO):
    """Indices (j, k), j < k, of the two largest components if the runner-up reaches ratio times the leader."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return None
    order = np.argsort(-values, kind="stable")
    lead, second = int(order[0]), int(order[1])
    if values[second] < ratio * values[lead]:
        return None
    return min(lead, second), max(lead, second)


def _penalty_moment(grid, u, epsilon, x0, R):
    G = heat_kernel_weight(grid, x0, R * R).values
    return R * R * integrate(ScalarField(grid, 2.0 * penalty_density(u, epsilon) * G))


def probe(traj, x0, t0, radii=None, include_penalty=False):
    """Sample I, H, N at a base point over decreasing radii and fit the constants.

    At an interface point (two components of comparable size at the base) the
    base value is the origin and the pair is measured through its signed
    difference u_j - u_k, shifted to vanish at the base.
    """
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    R0 = parabolic_radius(traj, x0, t0)
    if R0 <= 0:
        raise RangeError(f"base ({x0}, {t0}) has no parabolic neighbourhood inside the data")
    if radii is None:
        radii = default_radii(traj.grid, R0)
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if len(radii) == 0:
        raise InsufficientResolutionError(f"no radius fits between 3h and R0/2 at base ({x0}, {t0})")
    if np.any(radii <= 0) or np.any(radii >= R0 * (1.0 + 1e-12)):
        raise RangeError(f"radii must lie in (0, R0) with R0={R0:.6g}")

    grid = traj.grid
    values = values_at(traj, x0, t0)
    pair = interface_pair(values)
    if pair is None:
        base_value = project_sigma(values)
    else:
        j, k = pair
        base_value = SigmaPoint((0.0,) * len(values))
        offset = values[j] - values[k]
        scale = float(np.max(np.abs(traj.field_at(t0))))
        if values[j] > OVERLAP_WARN * scale:
            logger.warning(
                "base %s t0=%.6g sits in an unsegregated layer: u_%d=%.3e u_%d=%.3e (sup %.3e)",
                x0, t0, j + 1, values[j], k + 1, values[k], scale,
            )

    def evaluate(R):
        t = t0 - R * R
        epsilon = traj.epsilon_at(t) if include_penalty else None
        u = traj.field_at(t)
        if pair is None:
            return compute_IHN([ScalarField(grid, uj) for uj in u], base_value, x0, R, epsilon=epsilon)
        signed = ScalarField(grid, u[j] - u[k] - offset)
        I, H, _ = compute_IHN([signed], SigmaPoint((0.0,)), x0, R)
        if epsilon is not None:
            I += _penalty_moment(grid, u, epsilon, x0, R)
        return I, H, 2.0 * I / H

    results = np.array(parallel_map(evaluate, radii))
    I_vals, H_vals, N_vals = results[:, 0], results[:, 1], results[:, 2]

    try:
        alpha_hat = extrapolate_frequency(radii, N_vals, traj.grid.min_spacing)
    except InsufficientResolutionError:
        alpha_hat = math.nan
    result = FrequencyProbe(
        base=(x0, float(t0)),
        radii=radii,
        I_vals=I_vals,
        H_vals=H_vals,
        N_vals=N_vals,
        fitted_C=fit_monotonicity_constant(radii, N_vals),
        alpha_hat=alpha_hat,
        growth_alpha=growth_exponent(radii, H_vals),
        R0=R0,
        base_value=base_value.comps,
        include_penalty=include_penalty,
        interface_pair=pair,
    )
    logger.debug("probe at %s t0=%.6g: N=%s C=%.3e alpha=%.6g", x0, t0, N_vals, result.fitted_C, alpha_hat)
    return result


def frequency_at(traj, x0, t0, radii=None, include_penalty=False):
    """Extrapolated frequency N(x0, t0) = lim N(R) as R -> 0."""
    result = probe(traj, x0, t0, radii, include_penalty)
    return extrapolate_frequency(result.radii, result.N_vals, traj.grid.min_spacing)


def blowup_rescale(traj, x0, t0, rho, window):
    """Sample u(x0 + rho xi, t0 + rho^2 s) over the window."""
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    grid = traj.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    xi = window.space_axis()
    s = window.time_axis()

    for a in range(grid.dim):
        lo, hi = x0[a] - rho * window.half_width, x0[a] + rho * window.half_width
        if lo < -1e-12 or hi > grid.extents[a] + 1e-12:
            raise RangeError(f"blow-up window leaves the domain along axis {a}: [{lo:.6g}, {hi:.6g}]")
    times = t0 + rho * rho * s
    t_lo, t_hi = traj.times[0], traj.times[-1]
    if times.min() < t_lo - 1e-12 or times.max() > t_hi + 1e-12:
        raise RangeError(f"blow-up window times [{times.min():.6g}, {times.max():.6g}] outside the trajectory")

    mesh = np.meshgrid(*([xi] * grid.dim), indexing="ij")
    points = np.stack([x0[a] + rho * mesh[a].ravel() for a in range(grid.dim)], axis=1)
    space_shape = (len(xi),) * grid.dim

    values = []
    for t in times:
        u = traj.field_at(t)
        values.append(np.stack([interpolate_at(grid, uj, points).reshape(space_shape) for uj in u]))
    dxi = xi[1] - xi[0]
    ds = s[1] - s[0] if len(s) > 1 else 1.0
    return BlowupSample(rho=rho, xi=xi, s=s, values=np.array(values), cell=dxi ** grid.dim * ds)


def blowup_defect(traj, x0, t0, rho1, rho2, window, alpha=1.0):
    """L2 distance over the window between rho^-alpha-normalized blow-ups at two scales."""
    a = blowup_rescale(traj, x0, t0, rho1, window)
    b = blowup_rescale(traj, x0, t0, rho2, window)
    diff = a.values / rho1 ** alpha - b.values / rho2 ** alpha
    return math.sqrt(float(np.sum(diff ** 2)) * a.cell)


def arc_eigenvalue(theta):
    """First Dirichlet eigenvalue (pi/theta)^2 of a circular arc of length theta."""
    if not theta > 0:
        raise DomainError(f"arc length must be positive, got {theta}")
    return (math.pi / theta) ** 2


def homogeneity_constant(n, alpha):
    """c(n, alpha) = alpha (alpha + n - 2), the spherical eigenvalue of an alpha-homogeneous caloric profile."""
    return alpha * (alpha + n - 2)


def gap_constants(n, d):
    """Frequency gap above 1 for points where d >= 3 components meet."""
    if n != 2:
        raise UnsupportedDimensionError(f"gap constants are implemented for n = 2 only, got n = {n}")
    if d < 3:
        raise DomainError(f"the gap needs at least 3 active components, got d = {d}")
    # One of the d >= 3 sectors has arc length at most 2 pi / 3
    eta = arc_eigenvalue(2.0 * math.pi / 3.0) - (n - 1)
    target = n - 1 + eta / 6.0
    # Positive root of alpha^2 + (n - 2) alpha - target = 0
    alpha = 0.5 * (-(n - 2) + math.sqrt((n - 2) ** 2 + 4.0 * target))
    return GapConstants(n=n, d=d, eta=eta, delta=alpha - 1.0)


def classify_point(alpha_hat, delta, tol=0.0):
    """Regular below 1 + delta/2 - tol, Singular above 1 + delta/2 + tol, else Unresolved."""
    threshold = 1.0 + 0.5 * delta
    if alpha_hat <= threshold - tol:
        return PointClass.REGULAR
    if alpha_hat >= threshold + tol:
        return PointClass.SINGULAR
    return PointClass.UNRESOLVED


def caloric_trajectory(grid, kind, times, center=None):
    """Exact one-component caloric fields sampled at the given times.

    "linear" is x1 - c1 (frequency 1); "quadratic" is (x1 - c1)^2 + 2 (t - t_last)
    (frequency 2), so both vanish at (center, times[-1]).
    """
    from .flow_solver import Trajectory

    center = grid.center() if center is None else center
    x1 = grid.coordinates()[0] - center[0]
    times = np.asarray(times, dtype=float)
    if kind == "linear":
        fields = [x1[None, ...] for _ in times]
    elif kind == "quadratic":
        fields = [(x1 ** 2 + 2.0 * (t - times[-1]))[None, ...] for t in times]
    else:
        raise DomainError(f"unknown caloric fixture {kind!r}")
    return Trajectory.from_fields(grid, times, fields)
