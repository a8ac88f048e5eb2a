from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse

from ..errors import DimensionMismatch, OutOfBounds
from ..types import FloatArray, IntArray

__all__ = (
    "Grid1D",
    "SparseInterpolation",
    "build_grid",
    "cubic_interp_weights",
    "interpolation_matrix",
)


log = logging.getLogger(__name__)

KEYS_A = -0.5
STENCIL = np.array([-1, 0, 1, 2])
MIN_PADDING = 1e-6
BOUNDS_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Grid1D:
    lower: float
    upper: float
    m: int

    def __post_init__(self) -> None:
        if self.m < 4:
            raise ValueError(f"Cubic interpolation needs at least 4 grid points, got {self.m}.")
        if not self.upper > self.lower:
            raise ValueError(f"Grid upper bound {self.upper} must exceed lower bound {self.lower}.")

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.m - 1)

    @property
    def nodes(self) -> FloatArray:
        return np.linspace(self.lower, self.upper, self.m)

    def contains(self, values: FloatArray) -> bool:
        values = np.asarray(values)
        slack = BOUNDS_TOLERANCE * max(1.0, self.upper - self.lower)
        return bool(np.all(values >= self.lower - slack) and np.all(values <= self.upper + slack))

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "m": self.m}


def build_grid(values: FloatArray, m: int, padding_fraction: float = 0.0, padding_cells: int = 0) -> Grid1D:
    """Regular grid over ``values`` padded by a fraction of their range plus whole cells on each side."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DimensionMismatch("grid values", "at least one value", 0)
    if m < 4:
        raise ValueError(f"Cubic interpolation needs at least 4 grid points, got {m}.")
    if m - 1 - 2 * padding_cells < 1:
        raise ValueError(f"{padding_cells} padding cells do not fit on a grid of {m} points.")

    low, high = float(values.min()), float(values.max())
    if high == low:
        log.warning("Projected values are constant at %g, expanding the grid range to +-1.", low)
        low, high = low - 1.0, high + 1.0

    pad = padding_fraction * (high - low)
    if padding_fraction > 0:
        pad = max(pad, MIN_PADDING)
    low, high = low - pad, high + pad

    if padding_cells:
        spacing = (high - low) / (m - 1 - 2 * padding_cells)
        low, high = low - padding_cells * spacing, high + padding_cells * spacing
    return Grid1D(low, high, m)


def _keys(s: FloatArray) -> FloatArray:
    s = np.abs(s)
    a = KEYS_A
    inner = ((a + 2) * s - (a + 3)) * s**2 + 1
    outer = ((a * s - 5 * a) * s + 8 * a) * s - 4 * a
    return np.where(s <= 1, inner, np.where(s < 2, outer, 0.0))


def _keys_derivative(s: FloatArray) -> FloatArray:
    sign = np.sign(s)
    s = np.abs(s)
    a = KEYS_A
    inner = (3 * (a + 2) * s - 2 * (a + 3)) * s
    outer = (3 * a * s - 10 * a) * s + 8 * a
    return sign * np.where(s <= 1, inner, np.where(s < 2, outer, 0.0))


def _fold(indices: FloatArray, raw: FloatArray, m: int) -> tuple[IntArray, FloatArray]:
    """Moves weights on the phantom nodes -1 and m onto the grid using 3c0 - 3c1 + c2 extrapolation.

    Each row ends up on the four consecutive nodes starting at ``start``.
    """
    start = np.clip(indices[:, 0], 0, m - 4)
    weights = np.zeros_like(raw)
    rows = np.arange(raw.shape[0])
    for k in range(4):
        node = indices[:, k]
        w = raw[:, k]
        inside = (node >= 0) & (node <= m - 1)
        np.add.at(weights, (rows[inside], node[inside] - start[inside]), w[inside])

        for phantom, neighbours in ((-1, (0, 1, 2)), (m, (m - 1, m - 2, m - 3))):
            hit = node == phantom
            if hit.any():
                for coefficient, neighbour in zip((3.0, -3.0, 1.0), neighbours):
                    np.add.at(weights, (rows[hit], neighbour - start[hit]), coefficient * w[hit])

    columns = start[:, None] + np.arange(4)
    return columns, weights


def cubic_interp_weights(
    grid: Grid1D, t: FloatArray | float, *, derivative: bool = False
) -> tuple[IntArray, FloatArray] | tuple[IntArray, FloatArray, FloatArray]:
    """Keys cubic convolution weights (a = -1/2) of the query points on the grid.

    Returns (n, 4) column indices and weights; with ``derivative`` also the weights'
    derivatives with respect to the query points. Points on the outermost cells use
    Keys' boundary extrapolation so every row still sums to one.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if not grid.contains(t):
        outside = t[(t < grid.lower) | (t > grid.upper)]
        raise OutOfBounds(float(outside[0]), grid.lower, grid.upper)

    h = grid.spacing
    u = np.clip((t - grid.lower) / h, 0.0, grid.m - 1.0)
    base = np.clip(np.floor(u).astype(np.int64), 0, grid.m - 2)
    offsets = u[:, None] - (base[:, None] + STENCIL)
    indices = base[:, None] + STENCIL

    columns, weights = _fold(indices, _keys(offsets), grid.m)
    if not derivative:
        return columns, weights
    _, slopes = _fold(indices, _keys_derivative(offsets) / h, grid.m)
    return columns, weights, slopes


@dataclass(frozen=True, eq=False)
class SparseInterpolation:
    """Four grid columns and weights per data point."""

    columns: IntArray = field(repr=False)
    weights: FloatArray = field(repr=False)
    m: int
    slopes: FloatArray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    def _csr(self, values: FloatArray) -> scipy.sparse.csr_matrix:
        rows = np.repeat(np.arange(self.n), 4)
        return scipy.sparse.csr_matrix((values.ravel(), (rows, self.columns.ravel())), shape=(self.n, self.m))

    @cached_property
    def matrix(self) -> scipy.sparse.csr_matrix:
        return self._csr(self.weights)

    @cached_property
    def derivative_matrix(self) -> scipy.sparse.csr_matrix:
        if self.slopes is None:
            raise ValueError("Interpolation was built without derivative weights.")
        return self._csr(self.slopes)


def interpolation_matrix(grid: Grid1D, values: FloatArray, *, derivative: bool = False) -> SparseInterpolation:
    if derivative:
        columns, weights, slopes = cubic_interp_weights(grid, values, derivative=True)
        return SparseInterpolation(columns, weights, grid.m, slopes)
    columns, weights = cubic_interp_weights(grid, values)
    return SparseInterpolation(columns, weights, grid.m)
