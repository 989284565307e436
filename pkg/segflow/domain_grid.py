"""Uniform tensor grids on rectangular or disk-masked domains.

Nodes are stored in arrays of shape ``grid.counts`` indexed ``[ix]`` or ``[ix, iy]``.
Flattening uses C order (the last axis is fastest); snapshot files use x-fastest
order and convert at the I/O boundary.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError, DomainError, RangeError, UsageError

logger = logging.getLogger(__name__)

GEOMETRIES = ("box", "disk-mask")


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    extents: tuple
    counts: tuple
    spacing: tuple
    interior_mask: np.ndarray
    quad_weight: np.ndarray
    geometry: str = "box"

    @property
    def key(self):
        return (self.dim, self.extents, self.counts, self.geometry)

    @property
    def shape(self):
        return self.counts

    @property
    def size(self):
        return int(np.prod(self.counts))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def min_spacing(self):
        return min(self.spacing)

    @property
    def n_interior(self):
        return int(self.interior_mask.sum())

    def axis(self, a):
        """Node coordinates along axis a."""
        return np.linspace(0.0, self.extents[a], self.counts[a])

    def coordinates(self):
        """Per-axis coordinate arrays of shape counts."""
        axes = [self.axis(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def center(self):
        return tuple(0.5 * e for e in self.extents)

    def distance_to_boundary(self, x):
        """Euclidean distance from point x to the boundary of the domain."""
        x = np.asarray(x, dtype=float)
        if self.geometry == "disk-mask":
            radius = 0.5 * min(self.extents)
            return float(radius - np.linalg.norm(x - np.asarray(self.center())))
        return float(min(min(x[a], self.extents[a] - x[a]) for a in range(self.dim)))

    def same_as(self, other):
        return self.key == other.key


def _trapezoid_weights(count, h):
    w = np.full(count, h)
    w[0] = w[-1] = 0.5 * h
    return w


def build_grid(dim, extents, counts, geometry="box"):
    """Build a uniform grid; boundary nodes of the bounding box are never interior."""
    if dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2, got {dim}", field="grid.dim")
    extents = tuple(float(e) for e in extents)
    counts = tuple(int(c) for c in counts)
    if len(extents) != dim or len(counts) != dim:
        raise ConfigurationError(
            f"extents and counts must have length {dim}, got {len(extents)} and {len(counts)}",
            field="grid.counts",
        )
    if any(c < 3 for c in counts):
        raise ConfigurationError(f"counts must be >= 3 per axis, got {list(counts)}", field="grid.counts")
    if any(not math.isfinite(e) or e <= 0 for e in extents):
        raise ConfigurationError(f"extents must be positive, got {list(extents)}", field="grid.extents")
    if geometry not in GEOMETRIES:
        raise ConfigurationError(f"geometry must be one of {GEOMETRIES}, got {geometry!r}", field="grid.geometry")
    return _grid_from_key((dim, extents, counts, geometry))


@lru_cache(maxsize=32)
def _grid_from_key(key):
    dim, extents, counts, geometry = key
    spacing = tuple(e / (c - 1) for e, c in zip(extents, counts))

    interior = np.zeros(counts, dtype=bool)
    inner = tuple(slice(1, c - 1) for c in counts)
    interior[inner] = True

    if geometry == "disk-mask":
        axes = [np.linspace(0.0, extents[a], counts[a]) for a in range(dim)]
        coords = np.meshgrid(*axes, indexing="ij")
        radius = 0.5 * min(extents)
        r2 = sum((coords[a] - 0.5 * extents[a]) ** 2 for a in range(dim))
        interior &= r2 < radius ** 2

    weights = _trapezoid_weights(counts[0], spacing[0])
    for a in range(1, dim):
        weights = np.multiply.outer(weights, _trapezoid_weights(counts[a], spacing[a]))

    interior.setflags(write=False)
    weights.setflags(write=False)
    grid = Grid(dim, extents, counts, spacing, interior, weights, geometry)
    logger.debug("built %s grid counts=%s spacing=%s interior=%d", geometry, counts, spacing, grid.n_interior)
    return grid


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per node of a grid.

    Operations producing fields keep non-interior values at exactly 0; the raw
    constructor accepts arbitrary values so stencils can be tested on closed forms.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(self.grid.counts):
            raise UsageError(f"field shape {values.shape} does not match grid counts {self.grid.counts}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.counts))

    @classmethod
    def from_function(cls, grid, fn, dirichlet=True):
        values = np.asarray(fn(*grid.coordinates()), dtype=float) * np.ones(grid.counts)
        if dirichlet:
            values = np.where(grid.interior_mask, values, 0.0)
        return cls(grid, values)

    def restricted(self):
        """Copy with every non-interior value set to 0."""
        return ScalarField(self.grid, np.where(self.grid.interior_mask, self.values, 0.0))

    def sup(self):
        return float(np.max(np.abs(self.values)))


def _check_same_grid(a, b):
    if not a.grid.same_as(b.grid):
        raise UsageError("fields live on different grids")


def _axis_second_difference(count, h):
    ones = np.ones(count)
    return sparse.spdiags([ones, -2.0 * ones, ones], [-1, 0, 1], count, count) / h ** 2


@lru_cache(maxsize=32)
def _full_laplacian(key):
    grid = _grid_from_key(key)
    ops = [_axis_second_difference(c, h) for c, h in zip(grid.counts, grid.spacing)]
    if grid.dim == 1:
        return ops[0].tocsr()
    nx, ny = grid.counts
    # C-order flattening: index = ix * ny + iy
    lap = sparse.kron(ops[0], sparse.eye(ny)) + sparse.kron(sparse.eye(nx), ops[1])
    return lap.tocsr()


def full_laplacian(grid):
    """Five-point (three-point in 1-D) stencil over every node of the bounding box."""
    return _full_laplacian(grid.key)


def masked_laplacian(grid, mask):
    """Laplacian restricted to the nodes in mask with zero values outside it."""
    mask = np.asarray(mask, dtype=bool) & grid.interior_mask
    index = np.flatnonzero(mask.ravel())
    lap = full_laplacian(grid)
    return lap[index, :][:, index].tocsc(), index


@lru_cache(maxsize=32)
def _interior_laplacian(key):
    grid = _grid_from_key(key)
    return masked_laplacian(grid, grid.interior_mask)


def interior_laplacian(grid):
    """Dirichlet Laplacian acting on interior nodes, with the flat interior index."""
    return _interior_laplacian(grid.key)


def apply_laplacian(f):
    """Central second differences on interior nodes, 0 elsewhere."""
    grid = f.grid
    out = full_laplacian(grid) @ f.values.ravel()
    out = out.reshape(grid.counts)
    return ScalarField(grid, np.where(grid.interior_mask, out, 0.0))


def heat_kernel_weight(grid, x0, tau):
    """Backward heat kernel (4 pi tau)^(-n/2) exp(-|x - x0|^2 / 4 tau) on the full box."""
    if not tau > 0:
        raise DomainError(f"kernel time lag must be positive, got {tau}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (grid.dim,):
        raise UsageError(f"base point must have {grid.dim} coordinates, got {x0.tolist()}")
    coords = grid.coordinates()
    r2 = sum((coords[a] - x0[a]) ** 2 for a in range(grid.dim))
    values = (4.0 * math.pi * tau) ** (-0.5 * grid.dim) * np.exp(-r2 / (4.0 * tau))
    return ScalarField(grid, values)


def kernel_normalization_error(grid, x0, tau):
    """Quadrature mass of the truncated kernel minus 1."""
    return integrate(heat_kernel_weight(grid, x0, tau)) - 1.0


def integrate(f):
    """Quadrature sum of values times node weights."""
    return float(np.sum(f.values * f.grid.quad_weight))


def inner(f, g):
    _check_same_grid(f, g)
    return float(np.sum(f.values * g.values * f.grid.quad_weight))


def l2_norm(f):
    return math.sqrt(max(inner(f, f), 0.0))


def dirichlet_form(f):
    """Discrete Dirichlet energy -integral(f * Laplacian f) of the Dirichlet-restricted field."""
    v = f.restricted()
    return -inner(v, apply_laplacian(v))


def interpolate_at(grid, values, points):
    """Multilinear interpolation of node values at physical points (shape (k, dim))."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[-1] != grid.dim:
        points = points.reshape(-1, grid.dim)
    for a in range(grid.dim):
        if np.any(points[:, a] < -1e-12) or np.any(points[:, a] > grid.extents[a] + 1e-12):
            raise RangeError(f"interpolation point outside the grid along axis {a}")
    axes = tuple(grid.axis(a) for a in range(grid.dim))
    clipped = np.clip(points, 0.0, np.asarray(grid.extents))
    interpolator = RegularGridInterpolator(axes, values, method="linear")
    return interpolator(clipped)
