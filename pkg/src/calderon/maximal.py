"""Local dyadic maximal operator and the weighted vector-valued maximal ratio.

The supremum runs over the dyadic ancestors of each finest cell (levels
``0..J``), so every admissible cube has volume at most one.  This dyadic
operator is dominated pointwise by the local maximal function over all
cubes, and dominates a fixed multiple of it by the shifted-cube covering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence as Seq, TextIO

import numpy as np

from .dyadic import Window, block_sum, upsample
from .errors import ParameterError
from .weights import Weight, finest_masses, read_cell_table

__all__ = ["CellFunction", "m_loc", "vv_maximal_constant",
           "read_cell_function", "write_cell_function"]


@dataclass(frozen=True, eq=False)
class CellFunction:
    """A nonnegative function, constant on the finest cells of a window."""

    window: Window
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.window.finest_shape:
            raise ParameterError(f"values must have shape {self.window.finest_shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, window: Window, idx) -> "CellFunction":
        """Characteristic function of an in-window dyadic cube."""
        idx = window.check(idx)
        level = np.zeros(window.level_shape(idx.j))
        level[window.position(idx)] = 1.0
        return cls(window, upsample(level, 2 ** (window.j_max - idx.j)))

    def __add__(self, other: "CellFunction") -> "CellFunction":
        return CellFunction(self.window, self.values + other.values)

    def __mul__(self, c: float) -> "CellFunction":
        return CellFunction(self.window, self.values * c)

    __rmul__ = __mul__


def m_loc(f: CellFunction) -> CellFunction:
    """Sup of averages of ``|f|`` over the dyadic ancestors of every finest cell."""
    win = f.window
    J = win.j_max
    vals = np.abs(f.values)
    out = vals.copy()
    for j in range(J):
        r = 2 ** (J - j)
        avg = block_sum(vals, r) / r**win.d
        np.maximum(out, upsample(avg, r), out=out)
    return CellFunction(win, out)


def _vv_norm(values: Seq[np.ndarray], q: float, p: float, masses: np.ndarray) -> float:
    arr = np.stack(values)
    if math.isinf(q):
        pt = arr.max(axis=0)
    else:
        pt = (arr**q).sum(axis=0) ** (1.0 / q)
    return float((pt**p * masses).sum()) ** (1.0 / p)


def vv_maximal_constant(family: Iterable[CellFunction], p: float, q: float, w: Weight) -> float:
    """``||(sum_j (M f_j)^q)^{1/q}||_{L_p(w)} / ||(sum_j f_j^q)^{1/q}||_{L_p(w)}``."""
    family = list(family)
    if not family:
        raise ParameterError("empty family")
    if not (1 < p < math.inf and 1 < q <= math.inf):
        raise ParameterError("need 1 < p < inf and 1 < q <= inf")
    win = family[0].window
    if any(f.window != win for f in family):
        raise ParameterError("family members live on different windows")
    masses = finest_masses(w, win)
    denom = _vv_norm([np.abs(f.values) for f in family], q, p, masses)
    if denom == 0:
        raise ParameterError("family has zero norm")
    num = _vv_norm([m_loc(f).values for f in family], q, p, masses)
    return num / denom


def read_cell_function(fh: Iterable[str]) -> CellFunction:
    window, vals = read_cell_table(fh)
    return CellFunction(window, vals)


def write_cell_function(f: CellFunction, fh: TextIO) -> None:
    win = f.window
    fh.write(f"window {win.d} {win.j_max} {win.half_extent}\n")
    for idx in win.indices(win.j_max):
        fh.write(" ".join(str(v) for v in (idx.j, *idx.k)) + f" {float(f.values[win.position(idx)])!r}\n")
