"""Axis-aligned boxes, uniform grids and nearest-center quantization.

All distances use the infinity norm. A grid over a box with radius ``delta``
places ``k_i = max(1, ceil(w_i / (2 delta)))`` centers per axis, evenly spaced
so that each center owns a cell of half-width ``w_i / (2 k_i) <= delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError

# Relative slack used when a ratio should be an integer but lands a few ulps
# above it, e.g. 0.3 / 0.1 = 3.0000000000000004.
CEIL_RTOL = 1e-12


def ceil_tol(x):
    """Ceiling that ignores floating-point noise just above an integer."""
    x = np.asarray(x, dtype=float)
    out = np.ceil(x - CEIL_RTOL * np.maximum(1.0, np.abs(x)))
    return out if out.ndim else float(out)


def floor_tol(x):
    """Floor that ignores floating-point noise just below an integer."""
    x = np.asarray(x, dtype=float)
    out = np.floor(x + CEIL_RTOL * np.maximum(1.0, np.abs(x)))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise RejectedInputError(f"box bounds have shapes {lo.shape} and {hi.shape}")
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise RejectedInputError(f"invalid box lo={lo} hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def ball(cls, center, radius):
        """The closed infinity-norm ball of ``radius`` around ``center``."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(c - radius, c + radius)

    @property
    def dim(self):
        return self.lo.size

    @property
    def widths(self):
        return self.hi - self.lo

    @property
    def diameter(self):
        return float(np.max(self.widths))

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))


@dataclass(frozen=True)
class Grid:
    box: Box
    delta: float
    centers_per_dim: tuple = field(init=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise RejectedInputError(f"grid radius must be positive, got {self.delta}")
        k = np.maximum(1, ceil_tol(self.box.widths / (2.0 * self.delta))).astype(np.int64)
        object.__setattr__(self, "centers_per_dim", tuple(int(v) for v in k))

    @property
    def size(self):
        return math.prod(self.centers_per_dim)

    @property
    def spacing(self):
        return self.box.widths / np.asarray(self.centers_per_dim)

    def axis_centers(self, i):
        k = self.centers_per_dim[i]
        w = self.box.widths[i]
        return self.box.lo[i] + (2 * np.arange(k) + 1) * w / (2 * k)

    def center_of(self, index):
        """Center for a per-axis index tuple."""
        j = np.asarray(index, dtype=float)
        k = np.asarray(self.centers_per_dim, dtype=float)
        return self.box.lo + (2 * j + 1) * self.box.widths / (2 * k)

    def centers(self):
        """All centers, in C order over the per-axis indices."""
        axes = [self.axis_centers(i) for i in range(self.box.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def flat_index(self, index):
        return int(np.ravel_multi_index(tuple(int(v) for v in index), self.centers_per_dim))

    def unflat_index(self, flat):
        if not 0 <= flat < self.size:
            raise IndexError(f"symbol {flat} outside alphabet of size {self.size}")
        return tuple(int(v) for v in np.unravel_index(int(flat), self.centers_per_dim))


def make_grid(box, delta):
    return Grid(box, float(delta))


def quantize(x, grid):
    """Nearest center of ``grid`` to ``x``.

    Returns ``(center, index, inside)`` where ``index`` is the per-axis index
    tuple and ``inside`` tells whether ``x`` lay in the grid's box. Ties go to
    the lower index; points outside the box clamp to the boundary cell.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != grid.box.lo.shape:
        raise RejectedInputError(f"point of shape {x.shape} for grid of dim {grid.box.dim}")
    k = np.asarray(grid.centers_per_dim)
    widths = grid.box.widths
    cell = np.where(widths > 0, widths / np.maximum(k, 1), 1.0)
    # Cell j covers (lo + j*c, lo + (j+1)*c]; the left-closed first cell and
    # this rule together send a point on a cell boundary to the lower index.
    j = np.ceil((x - grid.box.lo) / cell - 1.0)
    j = np.clip(j, 0, k - 1).astype(np.int64)
    index = tuple(int(v) for v in j)
    return grid.center_of(index), index, grid.box.contains(x)


def grid_count(diam, delta, dim):
    if not delta > 0 or dim < 1:
        raise RejectedInputError("grid_count needs delta > 0 and dim >= 1")
    per_axis = max(1, int(ceil_tol(diam / (2.0 * delta))))
    return per_axis**dim
