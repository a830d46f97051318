"""Dyadic cubes, index arithmetic and finite windows.

A cube ``Q_{j,k}`` is the half-open box ``[2^-j k, 2^-j (k+1))`` taken
componentwise.  A :class:`Window` truncates the index set to levels
``0..J`` and to cubes inside ``[-K, K)^d``.  Inside a window every level is
stored as a dense ``d``-dimensional array; array position ``i`` along an axis
corresponds to ``k = i - K 2^j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator, Sequence as Seq

import numpy as np

from .errors import WindowError

__all__ = [
    "DyadicIndex",
    "Window",
    "cube_bounds",
    "ancestor",
    "finest_cells",
    "contains",
    "upsample",
    "block_sum",
]


@dataclass(frozen=True, order=True)
class DyadicIndex:
    j: int
    k: tuple[int, ...]

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 0:
            raise WindowError(f"level must be a nonnegative integer, got {self.j!r}")
        k = tuple(int(x) for x in np.atleast_1d(self.k))
        if not k:
            raise WindowError("position vector must have at least one entry")
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "k", k)

    @property
    def d(self) -> int:
        return len(self.k)

    @property
    def volume(self) -> Fraction:
        return Fraction(1, 2 ** (self.j * self.d))

    def __iter__(self):
        # allows ``j, k = idx``
        yield self.j
        yield self.k


def as_index(idx) -> DyadicIndex:
    if isinstance(idx, DyadicIndex):
        return idx
    j, k = idx
    return DyadicIndex(j, tuple(np.atleast_1d(k)))


def cube_bounds(idx) -> tuple[tuple[Fraction, Fraction], ...]:
    """Exact per-coordinate bounds ``(lo, hi)`` of the half-open cube."""
    idx = as_index(idx)
    h = Fraction(1, 2 ** idx.j)
    return tuple((h * k, h * (k + 1)) for k in idx.k)


def contains(idx, x) -> bool:
    """Whether the point ``x`` lies in the half-open cube of ``idx``."""
    bounds = cube_bounds(idx)
    x = tuple(np.atleast_1d(x))
    if len(x) != len(bounds):
        raise WindowError("point dimension does not match cube dimension")
    return all(lo <= Fraction(xi) < hi for xi, (lo, hi) in zip(x, bounds))


def ancestor(idx, level: int) -> DyadicIndex:
    """The unique cube at ``level`` containing ``idx`` (floor toward -inf)."""
    idx = as_index(idx)
    if not 0 <= level <= idx.j:
        raise WindowError(f"ancestor level {level} outside [0, {idx.j}]")
    shift = idx.j - level
    return DyadicIndex(level, tuple(k >> shift for k in idx.k))


@dataclass(frozen=True)
class Window:
    """Finite truncation: levels ``0..j_max`` and cubes inside ``[-K, K)^d``."""

    d: int
    j_max: int
    half_extent: int

    def __post_init__(self):
        if self.d < 1:
            raise WindowError("dimension must be >= 1")
        if self.j_max < 0:
            raise WindowError("finest level must be >= 0")
        if self.half_extent < 1:
            raise WindowError("half extent must be a positive integer")

    @property
    def J(self) -> int:
        return self.j_max

    @property
    def K(self) -> int:
        return self.half_extent

    def side(self, j: int) -> int:
        """Number of level-``j`` cubes along one axis."""
        return 2 * self.half_extent * 2**j

    def offset(self, j: int) -> int:
        return self.half_extent * 2**j

    def level_shape(self, j: int) -> tuple[int, ...]:
        return (self.side(j),) * self.d

    @property
    def finest_shape(self) -> tuple[int, ...]:
        return self.level_shape(self.j_max)

    def cell_volume(self, j: int) -> float:
        return 2.0 ** (-j * self.d)

    def contains(self, idx) -> bool:
        idx = as_index(idx)
        if idx.d != self.d or not 0 <= idx.j <= self.j_max:
            return False
        off = self.offset(idx.j)
        return all(-off <= k < off for k in idx.k)

    def check(self, idx) -> DyadicIndex:
        idx = as_index(idx)
        if not self.contains(idx):
            raise WindowError(f"{idx} is outside {self}")
        return idx

    def position(self, idx) -> tuple[int, ...]:
        """Array position of an in-window index within its level array."""
        idx = self.check(idx)
        off = self.offset(idx.j)
        return tuple(k + off for k in idx.k)

    def index_at(self, j: int, pos: Seq[int]) -> DyadicIndex:
        off = self.offset(j)
        return DyadicIndex(j, tuple(int(i) - off for i in pos))

    def indices(self, j: int | None = None) -> Iterator[DyadicIndex]:
        """In-window indices, level-major then lexicographic in ``k``."""
        levels = range(self.j_max + 1) if j is None else (j,)
        for lev in levels:
            off = self.offset(lev)
            rng = range(-off, off)
            for k in product(rng, repeat=self.d):
                yield DyadicIndex(lev, k)

    def count(self, j: int | None = None) -> int:
        if j is not None:
            return self.side(j) ** self.d
        return sum(self.side(lev) ** self.d for lev in range(self.j_max + 1))

    def finest_lower_corners(self) -> np.ndarray:
        """Lower corners of all finest cells, shape ``finest_shape + (d,)``."""
        J = self.j_max
        h = 2.0**-J
        ax = (np.arange(self.side(J)) - self.offset(J)) * h
        grids = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack(grids, axis=-1)

    def refine(self) -> "Window":
        return Window(self.d, self.j_max + 1, self.half_extent)


def finest_cells(idx, window: Window) -> list[DyadicIndex]:
    """The ``2^((J-j)d)`` finest-level descendants of an in-window index."""
    idx = window.check(idx)
    r = 2 ** (window.j_max - idx.j)
    ranges = [range(k * r, (k + 1) * r) for k in idx.k]
    return [DyadicIndex(window.j_max, k) for k in product(*ranges)]


def upsample(arr: np.ndarray, factor: int) -> np.ndarray:
    """Repeat every entry ``factor`` times along each axis."""
    if factor == 1:
        return arr
    for axis in range(arr.ndim):
        arr = np.repeat(arr, factor, axis=axis)
    return arr


def block_sum(arr: np.ndarray, factor: int) -> np.ndarray:
    """Sum over non-overlapping blocks of side ``factor``; inverse shape of upsample."""
    if factor == 1:
        return arr
    shape = []
    for n in arr.shape:
        shape += [n // factor, factor]
    return arr.reshape(shape).sum(axis=tuple(range(1, 2 * arr.ndim, 2)))


def block_reduce(arr: np.ndarray, factor: int, func) -> np.ndarray:
    if factor == 1:
        return arr
    shape = []
    for n in arr.shape:
        shape += [n // factor, factor]
    return func(arr.reshape(shape), axis=tuple(range(1, 2 * arr.ndim, 2)))
