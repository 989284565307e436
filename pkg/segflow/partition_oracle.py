"""Reference optimal partitions: analytic on intervals, line-cut search on rectangles."""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics_partition import dirichlet_eigen
from .errors import ConfigurationError, DomainError, UsageError
from .parallel_utils import parallel_map

logger = logging.getLogger(__name__)

FAMILIES = ("axis-aligned-lines",)


@dataclass
class OracleResult:
    description: dict
    eigvals: tuple
    objective: float = field(default=None)

    def __post_init__(self):
        self.eigvals = tuple(float(x) for x in self.eigvals)
        self.objective = float(sum(self.eigvals))

    def to_dict(self):
        return {"description": self.description, "eigvals": list(self.eigvals), "objective": self.objective}


def interval_eigenvalue(length):
    return (math.pi / length) ** 2


def rectangle_eigenvalue(a, b):
    """pi^2 (1/a^2 + 1/b^2) for an a x b rectangle."""
    if not (a > 0 and b > 0):
        raise DomainError(f"rectangle sides must be positive, got {a} x {b}")
    return math.pi ** 2 * (1.0 / a ** 2 + 1.0 / b ** 2)


def optimal_partition_1d(length, m):
    """Equal split of (0, L) into m intervals, each with eigenvalue (m pi / L)^2."""
    if not length > 0:
        raise DomainError(f"interval length must be positive, got {length}")
    if m < 1:
        raise DomainError(f"m must be at least 1, got {m}")
    cuts = [k * length / m for k in range(1, m)]
    return OracleResult(
        description={"family": "equal-split", "length": float(length), "cuts": cuts},
        eigvals=[interval_eigenvalue(length / m)] * m,
    )


def brute_force_partition_1d(length, m, samples=200):
    """Search every choice of m-1 cut points on a uniform sample of (0, L)."""
    if m < 1:
        raise DomainError(f"m must be at least 1, got {m}")
    points = np.linspace(0.0, length, samples + 1)[1:-1]
    best_cuts, best_value = (), math.inf
    for cuts in itertools.combinations(points, m - 1):
        edges = (0.0,) + cuts + (length,)
        value = sum(interval_eigenvalue(b - a) for a, b in zip(edges[:-1], edges[1:]))
        if value < best_value:
            best_cuts, best_value = cuts, value
    edges = (0.0,) + best_cuts + (length,)
    return OracleResult(
        description={"family": "brute-force", "length": float(length), "cuts": [float(c) for c in best_cuts]},
        eigvals=[interval_eigenvalue(b - a) for a, b in zip(edges[:-1], edges[1:])],
    )


def _regions(grid, m, cut):
    """Region masks for a candidate; the cut row/column itself belongs to no region."""
    ix, iy = np.meshgrid(np.arange(grid.counts[0]), np.arange(grid.counts[1]), indexing="ij")
    interior = grid.interior_mask
    if m == 2:
        axis, index = cut
        coord = ix if axis == "x" else iy
        return [interior & (coord < index), interior & (coord > index)]
    cx, cy = cut
    return [
        interior & (ix < cx) & (iy < cy),
        interior & (ix > cx) & (iy < cy),
        interior & (ix < cx) & (iy > cy),
        interior & (ix > cx) & (iy > cy),
    ]


def _candidates(grid, m, stride):
    nx, ny = grid.counts
    if m == 2:
        return [("x", i) for i in range(1, nx - 1, stride)] + [("y", j) for j in range(1, ny - 1, stride)]
    return [(i, j) for i in range(1, nx - 1, stride) for j in range(1, ny - 1, stride)]


def optimal_partition_2d_search(grid, m, family="axis-aligned-lines", stride=1):
    """Exhaustive search over line cuts: one cut line for m=2, a cross for m=4.

    Regions left empty by a cut score as infinity; ties keep the earlier candidate,
    vertical cuts before horizontal ones and lower coordinates first.
    """
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown partition family {family!r}", field="oracle.family")
    if grid.dim != 2:
        raise UsageError(f"line-cut search needs a 2-D grid, got dim={grid.dim}")
    if m not in (2, 4):
        raise DomainError(f"line-cut search supports m in (2, 4), got {m}")
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}", field="oracle.stride")

    def evaluate(cut):
        eigvals = []
        for mask in _regions(grid, m, cut):
            if not mask.any():
                return cut, None
            lam, _ = dirichlet_eigen(mask, grid)
            eigvals.append(lam)
        return cut, eigvals

    candidates = _candidates(grid, m, stride)
    logger.info("searching %d %s candidates for m=%d", len(candidates), family, m)
    best_cut, best_eigvals, best_value = None, None, math.inf
    for cut, eigvals in parallel_map(evaluate, candidates):
        if eigvals is None:
            continue
        value = sum(eigvals)
        if value < best_value - 1e-12 * abs(best_value if math.isfinite(best_value) else 0.0):
            best_cut, best_eigvals, best_value = cut, eigvals, value
    if best_cut is None:
        raise DomainError("every candidate partition left a region empty")

    if m == 2:
        axis, index = best_cut
        a = 0 if axis == "x" else 1
        description = {"family": family, "m": m, "axis": axis, "index": int(index), "position": float(grid.axis(a)[index])}
    else:
        description = {
            "family": family,
            "m": m,
            "index": [int(best_cut[0]), int(best_cut[1])],
            "position": [float(grid.axis(0)[best_cut[0]]), float(grid.axis(1)[best_cut[1]])],
        }
    description["stride"] = stride
    return OracleResult(description=description, eigvals=best_eigvals)
