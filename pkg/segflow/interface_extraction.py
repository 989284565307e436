"""Free-interface extraction, support labels and parabolic geometry helpers.

Labels are 1-based component numbers; 0 marks the interface band, the zero set and
every non-interior node.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .domain_grid import ScalarField
from .errors import NotFoundError, UsageError
from .flow_solver import FlowState, stack_components

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class InterfaceSlice:
    grid: object
    t: float
    labels: np.ndarray
    owner: np.ndarray
    threshold: float

    @property
    def nodes(self):
        """Boolean mask of interface nodes (label 0)."""
        return self.labels == 0

    @property
    def interior_band(self):
        return self.nodes & self.grid.interior_mask

    def region(self, j):
        """Nodes owned by component j (1-based), interface band included."""
        return self.owner == j

    def to_frame(self):
        """One row per interior interface node: time, flat index, coordinates."""
        coords = self.grid.coordinates()
        band = self.interior_band
        flat = np.flatnonzero(band.ravel())
        data = {"t": np.full(len(flat), self.t), "node": flat}
        for a, name in zip(range(self.grid.dim), ("x", "y")):
            data[name] = coords[a].ravel()[flat]
        data["label"] = np.zeros(len(flat), dtype=int)
        return pd.DataFrame(data)


@dataclass(frozen=True)
class ParabolicPoint:
    x: tuple
    t: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))


def default_threshold(u):
    return 10.0 * np.finfo(float).eps * float(np.max(np.abs(u)))


def support_labels(state, threshold=None):
    """Label each node by its largest component when that reaches threshold."""
    grid, u = stack_components(state)
    t = state.t if isinstance(state, FlowState) else 0.0
    if threshold is None:
        threshold = default_threshold(u)
    if threshold < 0:
        raise UsageError(f"threshold must be nonnegative, got {threshold}")

    peak = np.max(u, axis=0)
    owner = np.where((peak > 0) & (peak >= threshold), np.argmax(u, axis=0) + 1, 0)
    owner = np.where(grid.interior_mask, owner, 0)

    # Interior nodes next to a node owned by a different component
    between = np.zeros(grid.counts, dtype=bool)
    for a in range(grid.dim):
        for shift in (1, -1):
            neighbour = np.roll(owner, shift, axis=a)
            edge = [slice(None)] * grid.dim
            edge[a] = 0 if shift == 1 else -1
            neighbour[tuple(edge)] = 0
            between |= (owner > 0) & (neighbour > 0) & (neighbour != owner)

    labels = np.where(between, 0, owner)
    labels = np.where(grid.interior_mask, labels, 0)
    return InterfaceSlice(grid=grid, t=float(t), labels=labels, owner=owner, threshold=float(threshold))


def band_volume(interface):
    """Measure of the interior interface band: band nodes times h^n."""
    return int(interface.interior_band.sum()) * interface.grid.cell_volume


def signed_two_phase(state, j, k):
    """u* = u_j - u_k for 0-based component indices j != k."""
    if j == k:
        raise UsageError(f"signed field needs two different components, got {j} and {k}")
    grid, u = stack_components(state)
    return ScalarField(grid, u[j] - u[k])


def zero_crossing_1d(f):
    """First sign change of a 1-D field, linearly interpolated between nodes."""
    grid = f.grid
    if grid.dim != 1:
        raise UsageError(f"zero crossings are 1-D only, got dim={grid.dim}")
    x = grid.axis(0)
    v = f.values
    signed = np.flatnonzero(v != 0)
    crossings = [(a, b) for a, b in zip(signed[:-1], signed[1:]) if np.sign(v[a]) != np.sign(v[b])]
    if not crossings:
        raise NotFoundError("no sign change in the signed field")
    if len(crossings) > 1:
        logger.warning("signed field changes sign %d times; using the first crossing", len(crossings))
    a, b = crossings[0]
    if b > a + 1:
        # exact zeros between the two signed nodes
        return float(0.5 * (x[a + 1] + x[b - 1]))
    return float(x[a] - v[a] * (x[b] - x[a]) / (v[b] - v[a]))


def interface_position_1d(state, j, k):
    """Subcell position of the j/k interface on a 1-D grid."""
    return zero_crossing_1d(signed_two_phase(state, j, k))


def parabolic_distance(p, q):
    """sqrt(|t_p - t_q| + |x_p - x_q|^2)."""
    dx = np.asarray(p.x) - np.asarray(q.x)
    return math.sqrt(abs(p.t - q.t) + float(np.dot(dx, dx)))


def random_sample_pairs(grid, n, seed=0):
    """n pairs of distinct interior node indices (flat, C order) from a seeded generator."""
    interior = np.flatnonzero(grid.interior_mask.ravel())
    if len(interior) < 2:
        raise UsageError("need at least two interior nodes to sample pairs")
    rng = np.random.default_rng(seed)
    first = rng.choice(interior, size=n)
    second = rng.choice(interior, size=n)
    same = first == second
    while np.any(same):
        second[same] = rng.choice(interior, size=int(same.sum()))
        same = first == second
    return np.stack([first, second], axis=1)


def lipschitz_ratio_scan(state, sample_pairs):
    """max over pairs of max_j |u_j(x) - u_j(y)| / |x - y|."""
    grid, u = stack_components(state)
    pairs = np.asarray(sample_pairs, dtype=int).reshape(-1, 2)
    if len(pairs) == 0:
        return 0.0
    interior = grid.interior_mask.ravel()
    if not np.all(interior[pairs]):
        raise UsageError("sample pairs must use interior nodes")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]

    coords = np.stack([c.ravel() for c in grid.coordinates()], axis=1)
    flat = u.reshape(u.shape[0], -1)
    distance = np.linalg.norm(coords[pairs[:, 0]] - coords[pairs[:, 1]], axis=1)
    jump = np.max(np.abs(flat[:, pairs[:, 0]] - flat[:, pairs[:, 1]]), axis=0)
    return float(np.max(jump / distance)) if len(distance) else 0.0


def lipschitz_ratio_series(traj, sample_pairs, final_fraction=0.2):
    """Lipschitz ratio at every snapshot in the final fraction of the trajectory."""
    times = traj.times
    start = times[-1] - final_fraction * (times[-1] - times[0])
    rows = [
        {"t": s.t, "lipschitz_ratio": lipschitz_ratio_scan(s, sample_pairs)} for s in traj.snapshots if s.t >= start
    ]
    return pd.DataFrame(rows, columns=["t", "lipschitz_ratio"])


def write_interface_csv(path, slices):
    """Concatenate interface slices into one CSV (t, node, coordinates, label)."""
    frames = [s.to_frame() for s in slices]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["t", "node", "label"])
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
