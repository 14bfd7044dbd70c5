"""Domains (interval, rectangle) and cell-centered grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Interval:
    """One-dimensional box (0, length)."""

    length: float

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError(f"interval length must be positive, got {self.length}")

    @property
    def measure(self) -> float:
        return self.length

    @property
    def ndim(self) -> int:
        return 1

    @property
    def extents(self) -> tuple[float, ...]:
        return (self.length,)


@dataclass(frozen=True)
class Rectangle:
    """Two-dimensional box (0, lx) x (0, ly)."""

    lx: float
    ly: float

    def __post_init__(self):
        for side in (self.lx, self.ly):
            if not (math.isfinite(side) and side > 0):
                raise ValueError(f"rectangle sides must be positive, got {side}")

    @property
    def measure(self) -> float:
        return self.lx * self.ly

    @property
    def ndim(self) -> int:
        return 2

    @property
    def extents(self) -> tuple[float, ...]:
        return (self.lx, self.ly)


Domain = Interval | Rectangle


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh over a domain.

    ``shape`` is (n,) on an interval or (nx, ny) on a rectangle; cell j is
    centered at (j + 1/2) * h along each axis.
    """

    domain: Domain
    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) != self.domain.ndim:
            raise ValueError(
                f"grid shape {shape} does not match a {self.domain.ndim}-d domain"
            )
        for n in shape:
            if n < 4:
                raise ValueError(f"need at least 4 cells per axis, got {n}")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.domain.extents, self.shape))

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for h in self.spacing:
            vol *= h
        return vol

    @property
    def n_cells(self) -> int:
        n = 1
        for m in self.shape:
            n *= m
        return n

    def axis_centers(self, axis: int):
        h = self.spacing[axis]
        return (np.arange(self.shape[axis]) + 0.5) * h

    def centers(self):
        """Cell-center coordinates, one array per axis (meshgrid 'ij' in 2D)."""
        axes = [self.axis_centers(k) for k in range(self.ndim)]
        if self.ndim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))
