"""Discretized action spaces: grids of parameter combinations with exact
index <-> coordinate arithmetic.

An action space is the Cartesian product of per-dimension grids
``{lower + n * step : n >= 0, lower + n * step <= upper}``.  Every action is
addressable both by its coordinate vector and by a flat integer index; the
mapping is a bijection with the last dimension varying fastest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Relative slack (in units of step) used for grid membership and point counts.
GRID_RTOL = 1e-9


@dataclass(frozen=True)
class DimensionSpec:
    """One adjustable parameter: bounds and discretization step."""

    lower: float
    upper: float
    step: float
    name: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper) and math.isfinite(self.step)):
            raise ValueError(f"dimension {self.name!r}: bounds and step must be finite")
        if self.step <= 0:
            raise ValueError(f"dimension {self.name!r}: step must be > 0, got {self.step}")
        if self.lower > self.upper:
            raise ValueError(
                f"dimension {self.name!r}: lower ({self.lower}) exceeds upper ({self.upper})"
            )

    @property
    def count(self) -> int:
        """Number of grid points, with slack to absorb float rounding."""
        return int(math.floor((self.upper - self.lower + GRID_RTOL * self.step) / self.step)) + 1

    def values(self) -> np.ndarray:
        return self.lower + self.step * np.arange(self.count)

    def nearest_index(self, x: float) -> int:
        """Grid index closest to x, clamped to bounds; exact ties go down."""
        t = (x - self.lower) / self.step
        if t <= 0:
            return 0
        if t >= self.count - 1:
            return self.count - 1
        n = math.floor(t)
        frac = t - n
        if frac > 0.5:
            return n + 1
        return n

    def index_of(self, x: float) -> int:
        """Grid index of an on-grid coordinate; raises if off-grid."""
        n = self.nearest_index(x)
        if abs(self.lower + n * self.step - x) > GRID_RTOL * self.step:
            raise ValueError(f"coordinate {x} is not on the grid of dimension {self.name!r}")
        return n


class ActionSpace:
    """Finite grid of parameter combinations.

    Flat indices are mixed-radix over the per-dimension grid sizes with the
    last dimension varying fastest.  Immutable after construction.
    """

    def __init__(self, dims: Sequence[DimensionSpec]):
        if len(dims) == 0:
            raise ValueError("action space needs at least one dimension")
        self.dims: tuple[DimensionSpec, ...] = tuple(dims)
        self.counts: tuple[int, ...] = tuple(d.count for d in self.dims)
        self.cardinality: int = int(np.prod([c for c in self.counts], dtype=object))
        self._grids = [d.values() for d in self.dims]
        self._coords_cache: np.ndarray | None = None

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def __len__(self) -> int:
        return self.cardinality

    def __repr__(self) -> str:
        shape = "x".join(str(c) for c in self.counts)
        return f"ActionSpace({shape}, |A|={self.cardinality})"

    def digits_of(self, index: int) -> tuple[int, ...]:
        if not (0 <= index < self.cardinality):
            raise IndexError(f"action index {index} out of range [0, {self.cardinality})")
        digits = []
        rem = index
        for c in reversed(self.counts):
            rem, d = divmod(rem, c)
            digits.append(d)
        return tuple(reversed(digits))

    def index_from_digits(self, digits: Sequence[int]) -> int:
        idx = 0
        for d, c in zip(digits, self.counts):
            idx = idx * c + d
        return idx

    def coords_at(self, index: int) -> np.ndarray:
        digits = self.digits_of(index)
        return np.array([g[d] for g, d in zip(self._grids, digits)], dtype=float)

    def coords_matrix(self) -> np.ndarray:
        """All action coordinates, shape (|A|, d), row i = action_at(i). Cached."""
        if self._coords_cache is None:
            mesh = np.meshgrid(*self._grids, indexing="ij")
            self._coords_cache = np.stack([m.ravel() for m in mesh], axis=1)
            self._coords_cache.setflags(write=False)
        return self._coords_cache

    def normalized_coords_matrix(self) -> np.ndarray:
        """Coordinates rescaled so each dimension spans [0, 1] (0 if degenerate)."""
        coords = self.coords_matrix().copy()
        for j, d in enumerate(self.dims):
            rng = d.upper - d.lower
            if rng > 0:
                coords[:, j] = (coords[:, j] - d.lower) / rng
            else:
                coords[:, j] = 0.0
        return coords


@dataclass(frozen=True)
class Action:
    """A single grid point: coordinates plus its flat index."""

    coords: tuple[float, ...]
    index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))


@dataclass(frozen=True)
class ActionSet:
    """Deduplicated set of flat action indices, ascending (canonical form)."""

    indices: tuple[int, ...] = field(default_factory=tuple)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "ActionSet":
        return cls(tuple(sorted(set(int(i) for i in indices))))

    def union(self, other: Iterable[int]) -> "ActionSet":
        return ActionSet.of(list(self.indices) + [int(i) for i in other])

    def __contains__(self, index: int) -> bool:
        return index in set(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def build_space(dims: Sequence[DimensionSpec]) -> ActionSpace:
    """Construct the discretized action space from per-dimension specs."""
    return ActionSpace(dims)


def action_at(space: ActionSpace, index: int) -> Action:
    """Action whose mixed-radix digits over the grid sizes equal ``index``."""
    return Action(coords=tuple(space.coords_at(index)), index=int(index))


def index_of(space: ActionSpace, coords: Sequence[float]) -> int:
    """Flat index of an on-grid coordinate vector (inverse of action_at)."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (space.ndim,):
        raise ValueError(f"expected {space.ndim} coordinates, got shape {coords.shape}")
    digits = [d.index_of(x) for d, x in zip(space.dims, coords)]
    return space.index_from_digits(digits)


def snap_to_grid(space: ActionSpace, coords: Sequence[float]) -> Action:
    """Nearest grid action (Euclidean); ties and out-of-bounds resolve toward
    the smaller flat index / the clamped boundary."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (space.ndim,):
        raise ValueError(f"expected {space.ndim} coordinates, got shape {coords.shape}")
    digits = [d.nearest_index(x) for d, x in zip(space.dims, coords)]
    idx = space.index_from_digits(digits)
    return action_at(space, idx)
