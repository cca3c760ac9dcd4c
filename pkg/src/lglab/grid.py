"""Uniform cell grids over a polygon's bounding box."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ConvexPolygon

MAX_CELLS_PER_AXIS = 4096


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise GridError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise GridError("grid needs at least one cell per axis")

    @classmethod
    def covering(cls, P: ConvexPolygon, h: float) -> "GridSpec":
        if not h > 0:
            raise GridError("grid spacing must be positive")
        x0, y0, x1, y1 = P.bbox
        nx = max(1, int(math.ceil((x1 - x0) / h - 1e-9)))
        ny = max(1, int(math.ceil((y1 - y0) / h - 1e-9)))
        if max(nx, ny) > MAX_CELLS_PER_AXIS:
            raise GridError(f"grid {nx}x{ny} exceeds the {MAX_CELLS_PER_AXIS}^2 limit")
        # centre the cells on the box
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        return cls(cx - 0.5 * nx * h, cy - 0.5 * ny * h, float(h), nx, ny)

    @classmethod
    def with_cells(cls, P: ConvexPolygon, n: int) -> "GridSpec":
        x0, y0, x1, y1 = P.bbox
        return cls.covering(P, max(x1 - x0, y1 - y0) / n)

    def centers(self) -> np.ndarray:
        """Cell centres, shape (ny, nx, 2)."""
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.h
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.h
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X, Y], axis=-1)

    def mask(self, P: ConvexPolygon) -> np.ndarray:
        return P.contains(self.centers(), tol=0.0)


@dataclass(frozen=True, eq=False)
class GridField:
    spec: GridSpec
    values: np.ndarray  # (ny, nx), nan outside the mask
    mask: np.ndarray

    def masked(self) -> np.ndarray:
        return self.values[self.mask]
