"""Deterministic random instances.

Instance ``i`` of a batch seeded with ``seed`` draws from its own generator
``numpy.random.default_rng(SeedSequence([seed, i]))``, so instances do not
depend on batch size, order or worker assignment.

Magnitudes are log-uniform: ``2^U`` with ``U ~ Uniform(-8, 8)``.  Sparse
shapes draw ``nnz`` distinct indices uniformly among the in-window indices
of the admitted levels; dense shapes fill every admitted index.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .dyadic import Window
from .errors import ParameterError
from .maximal import CellFunction
from .sequences import Sequence
from .weights import CellMeasure, Constant, Exponential, Power, Weight

__all__ = [
    "InstanceShape",
    "instance_rng",
    "random_sequence",
    "generate_instances",
    "random_cell_function",
    "random_cell_measure",
    "parse_weight",
]

LOG2_RANGE = 8.0


@dataclass(frozen=True)
class InstanceShape:
    """Window plus sparsity.  ``nnz=None`` means dense on ``levels``."""

    d: int = 1
    J: int = 6
    K: int = 2
    nnz: int | None = 20
    levels: tuple[int, int] | None = None  # inclusive level range
    complex: bool = False

    @property
    def window(self) -> Window:
        return Window(self.d, self.J, self.K)

    def level_range(self) -> range:
        lo, hi = self.levels if self.levels is not None else (0, self.J)
        if not 0 <= lo <= hi <= self.J:
            raise ParameterError(f"level range {lo}..{hi} outside 0..{self.J}")
        return range(lo, hi + 1)

    @classmethod
    def parse(cls, text: str) -> "InstanceShape":
        """Parse ``"d=1,J=6,K=2,nnz=20"`` or ``"dense,levels=0..3,d=1,K=2"``."""
        kw: dict = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            if part == "dense":
                kw["nnz"] = None
                continue
            if part == "complex":
                kw["complex"] = True
                continue
            key, _, val = part.partition("=")
            key = key.strip()
            val = val.strip()
            if key == "levels":
                m = re.fullmatch(r"(\d+)\.\.(\d+)", val)
                if not m:
                    raise ParameterError(f"bad level range {val!r}")
                kw["levels"] = (int(m.group(1)), int(m.group(2)))
            elif key in ("d", "J", "K", "nnz"):
                kw[key] = int(val)
            else:
                raise ParameterError(f"unknown shape key {key!r}")
        return cls(**kw)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)]))


def _magnitudes(rng: np.random.Generator, n: int) -> np.ndarray:
    return 2.0 ** rng.uniform(-LOG2_RANGE, LOG2_RANGE, n)


def random_sequence(rng: np.random.Generator, shape: InstanceShape) -> Sequence:
    win = shape.window
    levels = list(shape.level_range())
    sizes = np.array([win.count(j) for j in levels])
    total = int(sizes.sum())
    n = total if shape.nnz is None else min(shape.nnz, total)
    flat = np.arange(total) if shape.nnz is None else np.sort(rng.choice(total, n, replace=False))
    vals = _magnitudes(rng, n)
    if shape.complex:
        vals = vals * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    lam = Sequence.zeros(win, complex if shape.complex else float)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    for f, v in zip(flat, vals):
        li = int(np.searchsorted(starts, f, side="right") - 1)
        j = levels[li]
        pos = np.unravel_index(int(f - starts[li]), win.level_shape(j))
        lam.levels[j][pos] = v
    return lam


def generate_instances(seed: int, count: int, shape: InstanceShape | str | None = None) -> list[Sequence]:
    if isinstance(shape, str):
        shape = InstanceShape.parse(shape)
    shape = shape or InstanceShape()
    return [random_sequence(instance_rng(seed, i), shape) for i in range(count)]


def random_cell_function(rng: np.random.Generator, window: Window, pieces: int = 6) -> CellFunction:
    """Sum of log-uniformly scaled indicators of random in-window dyadic cubes."""
    vals = np.zeros(window.finest_shape)
    for _ in range(pieces):
        j = int(rng.integers(0, window.j_max + 1))
        pos = tuple(int(rng.integers(0, window.side(j))) for _ in range(window.d))
        f = CellFunction.indicator(window, window.index_at(j, pos))
        vals += f.values * _magnitudes(rng, 1)[0]
    return CellFunction(window, vals)


def random_cell_measure(rng: np.random.Generator, window: Window, spread: float = 4.0) -> CellMeasure:
    """Finest-cell masses ``vol * 2^U`` with ``U ~ Uniform(-spread, spread)``."""
    vol = window.cell_volume(window.j_max)
    return CellMeasure(window, vol * 2.0 ** rng.uniform(-spread, spread, window.finest_shape))


def parse_weight(text: str, window: Window | None = None) -> Weight:
    """``const:c``, ``power:alpha``, ``power:alpha:axis``, ``exp:a`` or ``cells:PATH``."""
    kind, _, rest = text.partition(":")
    args = rest.split(":") if rest else []
    try:
        if kind == "const":
            return Constant(float(args[0]) if args else 1.0)
        if kind == "power":
            return Power(float(args[0]), axis=len(args) > 1 and args[1] == "axis")
        if kind == "exp":
            return Exponential(float(args[0]))
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"bad weight {text!r}") from exc
    if kind == "cells":
        from .weights import read_cell_measure

        with open(rest, encoding="utf-8") as fh:
            cm = read_cell_measure(fh)
        if window is not None and cm.window != window:
            raise ParameterError(f"cell weight lives on {cm.window}, not on {window}")
        return cm
    raise ParameterError(f"unknown weight kind {kind!r}")
