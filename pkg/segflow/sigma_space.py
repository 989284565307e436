"""Geometry of the singular target: m nonnegative coordinate half-lines meeting at 0."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .domain_grid import integrate
from .errors import DomainError, UsageError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class SigmaPoint:
    comps: tuple

    def __post_init__(self):
        comps = tuple(float(c) for c in self.comps)
        if any(c < 0 for c in comps):
            raise DomainError(f"point {comps} has a negative component")
        if sum(1 for c in comps if c > 0) > 1:
            raise DomainError(f"point {comps} has more than one positive component")
        object.__setattr__(self, "comps", comps)

    @property
    def m(self):
        return len(self.comps)

    @property
    def line(self):
        """Index of the active half-line, or None at the origin."""
        for j, c in enumerate(self.comps):
            if c > 0:
                return j
        return None

    @property
    def radius(self):
        return max(self.comps) if self.comps else 0.0

    def as_array(self):
        return np.asarray(self.comps)


@dataclass
class SigmaFieldCheck:
    max_overlap: float
    negative_mass: float
    norm_errors: tuple = ()
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def d_sigma(p, q):
    """Intrinsic distance: Euclidean along one line, |p| + |q| across lines."""
    if p.m != q.m:
        raise UsageError(f"points have {p.m} and {q.m} components")
    lp, lq = p.line, q.line
    if lp is None or lq is None or lp == lq:
        return float(np.linalg.norm(p.as_array() - q.as_array()))
    return p.radius + q.radius


def project_sigma(y):
    """Keep the largest component (lowest index on ties) after clipping negatives."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, None)
    out = np.zeros_like(y)
    if y.size:
        k = int(np.argmax(y))
        out[k] = y[k]
    return SigmaPoint(tuple(out))


def project_sigma_field(u):
    """Nodewise project_sigma of a stacked field array of shape (m, *counts)."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, None)
    winner = np.argmax(u, axis=0)
    keep = np.arange(u.shape[0]).reshape((-1,) + (1,) * (u.ndim - 1)) == winner
    return np.where(keep, u, 0.0)


def d_sigma_sq_field(u, p):
    """Nodewise squared distance from a stacked field to a point of the target.

    Nodes whose dominant component sits on the same line as p (or either one at the
    origin) use the Euclidean distance, otherwise (|u| + |p|)^2; the two agree with the
    intrinsic distance on target-valued fields and reduce to |u - p|^2 for signed
    single-component fields.
    """
    u = np.asarray(u, dtype=float)
    pv = p.as_array().reshape((-1,) + (1,) * (u.ndim - 1))
    euclid = np.sum((u - pv) ** 2, axis=0)
    k = p.line
    if k is None or u.shape[0] == 1:
        return euclid
    magnitude = np.sqrt(np.sum(u ** 2, axis=0))
    dominant = np.argmax(np.abs(u), axis=0)
    across = (dominant != k) & (magnitude > 0)
    return np.where(across, (magnitude + p.radius) ** 2, euclid)


def max_overlap_density(u):
    """Nodewise second-largest component of a stacked field."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] < 2:
        return np.zeros(u.shape[1:])
    ordered = np.sort(u, axis=0)
    return ordered[-2]


def validate_initial(g, c, tol=DEFAULT_TOL, check_overlap=True, check_sign=True):
    """Check that g is target-valued and satisfies integral(g_j^2) = c_j^2.

    Tolerances are relative: overlap and negativity against sup|g|, norms against c_j^2.
    """
    if not g:
        raise UsageError("no components given")
    grid = g[0].grid
    if any(not gj.grid.same_as(grid) for gj in g):
        raise UsageError("components live on different grids")
    if len(c) != len(g):
        raise UsageError(f"{len(g)} components but {len(c)} constraint values")

    stacked = np.stack([gj.values for gj in g])
    scale = max(float(np.max(np.abs(stacked))), 1e-300)
    max_overlap = float(np.max(max_overlap_density(np.clip(stacked, 0.0, None))))
    negative_mass = float(max(-np.min(stacked), 0.0))

    norm_errors = []
    violations = []
    if check_overlap and max_overlap > tol * scale:
        violations.append(f"supports overlap (max_overlap={max_overlap:.3e})")
    if check_sign and negative_mass > tol * scale:
        violations.append(f"negative values present (negative_mass={negative_mass:.3e})")
    for j, (gj, cj) in enumerate(zip(g, c)):
        err = abs(integrate(type(gj)(grid, gj.values ** 2)) - cj ** 2)
        norm_errors.append(err)
        if err > tol * cj ** 2:
            violations.append(f"component {j + 1} has integral(g^2) off by {err:.3e} from c^2={cj ** 2:.6g}")

    check = SigmaFieldCheck(max_overlap, negative_mass, tuple(norm_errors), violations)
    if violations:
        logger.debug("initial data check failed: %s", violations)
    return check
