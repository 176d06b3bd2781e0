"""Axis-aligned boxes and regular cell grids."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or len(lo) == 0:
            raise InputError("box bounds must be non-empty and of equal length")
        if not all(np.isfinite(lo)) or not all(np.isfinite(hi)):
            raise InputError("box bounds must be finite")
        if any(h <= l for l, h in zip(lo, hi)):
            raise InputError(f"degenerate box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs) -> "Box":
        pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(tuple(pairs[:, 0]), tuple(pairs[:, 1]))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def to_pairs(self) -> list:
        return [[l, h] for l, h in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class Grid:
    """Regular grid of ``cells_per_axis**d`` cells covering ``box``.

    Values attached to a cell are taken at its center. Cells are indexed in C
    order, so ``flat = np.ravel_multi_index(idx, shape)``.
    """

    box: Box
    cells_per_axis: int

    def __post_init__(self):
        if int(self.cells_per_axis) < 2:
            raise InputError("cells_per_axis must be at least 2")
        object.__setattr__(self, "cells_per_axis", int(self.cells_per_axis))

    @classmethod
    def default_for(cls, box: Box) -> "Grid":
        if box.dim > 3:
            raise InputError(f"grid connectivity supports d <= 3, got d = {box.dim}")
        return cls(box, 256 if box.dim <= 2 else 64)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def shape(self) -> tuple:
        return (self.cells_per_axis,) * self.dim

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.box.hi) - np.array(self.box.lo)) / self.cells_per_axis

    @property
    def axes(self) -> list:
        lo, w = np.array(self.box.lo), self.spacing
        return [lo[i] + (np.arange(self.cells_per_axis) + 0.5) * w[i] for i in range(self.dim)]

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(n_cells, d)`` in flat-index order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_of(self, x) -> tuple | None:
        """Multi-index of the cell containing ``x``; ``None`` outside the box."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise InputError(f"point of dimension {x.shape} does not match grid dimension {self.dim}")
        idx = np.floor((x - np.array(self.box.lo)) / self.spacing).astype(int)
        # points exactly on the upper face belong to the last cell
        idx = np.where(x == np.array(self.box.hi), self.cells_per_axis - 1, idx)
        if np.any(idx < 0) or np.any(idx >= self.cells_per_axis):
            return None
        return tuple(int(i) for i in idx)

    def to_dict(self) -> dict:
        return {"box": self.box.to_pairs(), "cells_per_axis": self.cells_per_axis}

    @classmethod
    def from_dict(cls, spec: dict) -> "Grid":
        unknown = set(spec) - {"box", "cells_per_axis"}
        if unknown:
            raise InputError(f"unknown grid keys: {sorted(unknown)}")
        box = Box.from_pairs(spec["box"])
        n = spec.get("cells_per_axis")
        return cls.default_for(box) if n is None else cls(box, n)
