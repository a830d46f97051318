"""Weighted dyadic sequence spaces f^s_{p,q}(w), b^s_{p,q}(w) and b^s_{p,q}(s-y).

Sequences live on a :class:`~calderon.dyadic.Window`.  Each level is a dense
array, so the window is the whole universe: norms carry no tail estimates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, TextIO

import numpy as np

from .dyadic import DyadicIndex, Window, as_index, upsample
from .errors import ParameterError, WindowError
from .weights import Constant, Weight, combine_exponents, level_masses

__all__ = [
    "Sequence",
    "YTable",
    "SpaceParams",
    "exponent_ratio",
    "interpolate_exponent",
    "interpolate_params",
    "stack",
    "f_norm",
    "b_norm",
    "b_norm_y",
    "norm",
    "cutoff",
    "ring_convergence_profile",
    "lift_seq",
    "read_sequence",
    "write_sequence",
]

INF = math.inf


def _is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


def exponent_ratio(a, b) -> float:
    """``a / b`` for integrability exponents, with ``inf/inf = 1`` and ``a/inf = 0``."""
    if _is_inf(b):
        return 1.0 if _is_inf(a) else 0.0
    if _is_inf(a):
        raise ParameterError("ratio inf/finite is unbounded")
    return a / b


def interpolate_exponent(a0, a1, theta):
    """``1/a = (1-theta)/a0 + theta/a1`` with ``1/inf = 0``; exact for rationals."""
    exact = all(isinstance(v, Rational) for v in (a0, a1, theta))
    one = Fraction(1) if exact else 1.0
    inv0 = 0 if _is_inf(a0) else one / a0
    inv1 = 0 if _is_inf(a1) else one / a1
    inv = (one - theta) * inv0 + theta * inv1
    if inv == 0:
        return INF
    return one / inv


@dataclass(frozen=True, eq=False)
class Sequence:
    """Coefficients ``lambda_{j,k}`` on a window; absent entries are zero."""

    window: Window
    levels: tuple = field(repr=False)

    def __post_init__(self):
        levels = tuple(np.asarray(a) for a in self.levels)
        if len(levels) != self.window.j_max + 1:
            raise WindowError("need one array per level")
        for j, a in enumerate(levels):
            if a.shape != self.window.level_shape(j):
                raise WindowError(f"level {j} has shape {a.shape}, "
                                  f"expected {self.window.level_shape(j)}")
        object.__setattr__(self, "levels", levels)

    # construction ---------------------------------------------------------

    @classmethod
    def zeros(cls, window: Window, dtype=float) -> "Sequence":
        return cls(window, tuple(np.zeros(window.level_shape(j), dtype=dtype)
                                 for j in range(window.j_max + 1)))

    @classmethod
    def from_entries(cls, window: Window, entries: Mapping) -> "Sequence":
        cplx = any(isinstance(v, complex) or np.iscomplexobj(v) for v in entries.values())
        seq = cls.zeros(window, complex if cplx else float)
        for idx, val in entries.items():
            idx = window.check(idx)
            seq.levels[idx.j][window.position(idx)] = val
        return seq

    def map_levels(self, func) -> "Sequence":
        return Sequence(self.window, tuple(func(j, a) for j, a in enumerate(self.levels)))

    # access ---------------------------------------------------------------

    def __getitem__(self, idx):
        idx = self.window.check(idx)
        return self.levels[idx.j][self.window.position(idx)]

    def entries(self) -> dict:
        """Nonzero entries as ``{DyadicIndex: value}``, level-major lexicographic."""
        out = {}
        for j, a in enumerate(self.levels):
            for pos in zip(*np.nonzero(a)):
                out[self.window.index_at(j, pos)] = a[pos].item()
        return out

    def support(self) -> list[DyadicIndex]:
        return list(self.entries())

    @property
    def nnz(self) -> int:
        return int(sum(np.count_nonzero(a) for a in self.levels))

    def abs(self) -> "Sequence":
        return self.map_levels(lambda j, a: np.abs(a))

    def max_abs(self) -> float:
        return max(float(np.abs(a).max(initial=0.0)) for a in self.levels)

    # arithmetic -----------------------------------------------------------

    def _check(self, other: "Sequence"):
        if other.window != self.window:
            raise WindowError("sequences live on different windows")

    def __add__(self, other: "Sequence") -> "Sequence":
        self._check(other)
        return Sequence(self.window, tuple(a + b for a, b in zip(self.levels, other.levels)))

    def __sub__(self, other: "Sequence") -> "Sequence":
        self._check(other)
        return Sequence(self.window, tuple(a - b for a, b in zip(self.levels, other.levels)))

    def __mul__(self, c) -> "Sequence":
        return self.map_levels(lambda j, a: a * c)

    __rmul__ = __mul__

    def allclose(self, other: "Sequence", rtol=1e-12, atol=0.0) -> bool:
        self._check(other)
        return all(np.allclose(a, b, rtol=rtol, atol=atol)
                   for a, b in zip(self.levels, other.levels))


@dataclass(frozen=True, eq=False)
class YTable:
    """Positive numbers ``y_{j,k}`` replacing the cube masses of a weight.

    Missing entries are stored as NaN and may not meet the support of a
    sequence whose norm is taken.
    """

    window: Window
    levels: tuple = field(repr=False)

    def __post_init__(self):
        levels = tuple(np.asarray(a, float) for a in self.levels)
        if len(levels) != self.window.j_max + 1:
            raise WindowError("need one array per level")
        for j, a in enumerate(levels):
            if a.shape != self.window.level_shape(j):
                raise WindowError(f"level {j} has the wrong shape")
            ok = np.isnan(a) | ((a > 0) & np.isfinite(a))
            if not ok.all():
                raise ParameterError("y entries must be positive and finite")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_weight(cls, w: Weight, window: Window) -> "YTable":
        return cls(window, level_masses(w, window))

    @classmethod
    def volumes(cls, window: Window) -> "YTable":
        return cls(window, tuple(np.full(window.level_shape(j), window.cell_volume(j))
                                 for j in range(window.j_max + 1)))

    @staticmethod
    def combine(y0: "YTable", y1: "YTable", theta, p0, p1) -> "YTable":
        """``y = y0^{(1-theta)p/p0} y1^{theta p/p1}`` per index."""
        if y0.window != y1.window:
            raise WindowError("y-tables live on different windows")
        a, b = combine_exponents(theta, p0, p1)
        return YTable(y0.window, tuple(u**a * v**b for u, v in zip(y0.levels, y1.levels)))


@dataclass(frozen=True)
class SpaceParams:
    """Parameters ``(s, p, q)``, the scale ``"F"`` or ``"B"`` and a weight.

    For ``p = inf`` the weight is replaced by the constant 1.  A
    :class:`YTable` in place of the weight selects the ``b^s_{p,q}(s-y)`` norm.
    """

    s: float
    p: float
    q: float
    scale: str = "F"
    weight: object = field(default_factory=Constant)

    def __post_init__(self):
        scale = self.scale.upper()
        if scale not in ("F", "B"):
            raise ParameterError(f"unknown scale {self.scale!r}")
        object.__setattr__(self, "scale", scale)
        if not (self.p > 0 and self.q > 0):
            raise ParameterError("p and q must be positive")
        if scale == "F" and _is_inf(self.p):
            raise ParameterError("f^s_{inf,q} is not supported")
        if isinstance(self.weight, YTable) and scale == "F":
            raise ParameterError("y-tables only define b-type spaces")
        if _is_inf(self.p) and not isinstance(self.weight, YTable):
            object.__setattr__(self, "weight", Constant(1.0))

    def replace(self, **kw) -> "SpaceParams":
        vals = dict(s=self.s, p=self.p, q=self.q, scale=self.scale, weight=self.weight)
        vals.update(kw)
        return SpaceParams(**vals)


def interpolate_params(P0: SpaceParams, P1: SpaceParams, theta):
    """Interpolated ``(s, p, q)``: affine in ``s``, harmonic in ``p`` and ``q``."""
    if not 0 < theta < 1:
        raise ParameterError("theta must lie in (0, 1)")
    s = (1 - theta) * P0.s + theta * P1.s
    return (s, interpolate_exponent(P0.p, P1.p, theta),
            interpolate_exponent(P0.q, P1.q, theta))


# --------------------------------------------------------------------------
# norms


def _scaled_levels(lam: Sequence, s: float):
    for j, a in enumerate(lam.levels):
        yield j, np.abs(a) * 2.0 ** (j * s)


def stack(lam: Sequence, s: float, q: float) -> np.ndarray:
    """Finest-cell values of ``(sum_j 2^{jsq} |lambda_{j,k}|^q X_{j,k})^{1/q}``."""
    win = lam.window
    J = win.j_max
    acc = np.zeros(win.finest_shape)
    for j, a in _scaled_levels(lam, s):
        up = upsample(a, 2 ** (J - j))
        if _is_inf(q):
            np.maximum(acc, up, out=acc)
        else:
            acc += up**q
    if not _is_inf(q):
        acc = acc ** (1.0 / q)
    return acc


def _lp_sum(values: np.ndarray, masses, p: float) -> float:
    if _is_inf(p):
        return float(values.max(initial=0.0))
    return float((values**p * masses).sum()) ** (1.0 / p)


def _lq(values: Iterable[float], q: float) -> float:
    vals = np.fromiter(values, float)
    if _is_inf(q):
        return float(vals.max(initial=0.0))
    return float((vals**q).sum()) ** (1.0 / q)


def f_norm(lam: Sequence, P: SpaceParams) -> float:
    """Quasi-norm in ``f^s_{p,q}(w)``, exact on the window."""
    if P.scale != "F":
        raise ParameterError("f_norm needs scale F")
    masses = level_masses(P.weight, lam.window)[lam.window.j_max]
    return _lp_sum(stack(lam, P.s, P.q), masses, P.p)


def b_norm_y(lam: Sequence, s: float, p: float, q: float, y: YTable | None) -> float:
    """Quasi-norm in ``b^s_{p,q}(s-y)``; ``y`` is ignored when ``p = inf``."""
    if not _is_inf(p):
        if y is None or y.window != lam.window:
            raise WindowError("y-table must live on the sequence window")
        for a, t in zip(lam.levels, y.levels):
            if np.any((a != 0) & np.isnan(t)):
                raise ParameterError("y-table misses an entry on the support")

    def inner():
        for j, a in _scaled_levels(lam, s):
            if _is_inf(p):
                yield float(a.max(initial=0.0))
            else:
                t = np.nan_to_num(y.levels[j], nan=0.0)
                yield _lp_sum(a, t, p)

    return _lq(inner(), q)


def b_norm(lam: Sequence, P: SpaceParams) -> float:
    """Quasi-norm in ``b^s_{p,q}(w)`` (or ``b^s_{p,q}(s-y)`` for a y-table weight)."""
    if P.scale != "B":
        raise ParameterError("b_norm needs scale B")
    if isinstance(P.weight, YTable):
        y = P.weight
    elif _is_inf(P.p):
        y = None
    else:
        y = YTable(lam.window, level_masses(P.weight, lam.window))
    return b_norm_y(lam, P.s, P.p, P.q, y)


def norm(lam: Sequence, P: SpaceParams) -> float:
    return f_norm(lam, P) if P.scale == "F" else b_norm(lam, P)


# --------------------------------------------------------------------------
# cutoffs, ring closure, lifting


def cutoff(lam: Sequence, M: int) -> Sequence:
    """Keep entries with ``j <= M`` and ``max_i |k_i| <= M``."""
    if M < 0:
        raise ParameterError("cutoff parameter must be >= 0")
    win = lam.window

    def cut(j, a):
        if j > M:
            return np.zeros_like(a)
        ks = np.abs(np.arange(win.side(j)) - win.offset(j))
        keep = ks <= M
        mask = keep
        for _ in range(1, win.d):
            mask = np.multiply.outer(mask, keep)
        return np.where(mask, a, 0)

    return lam.map_levels(cut)


def ring_convergence_profile(lam: Sequence, P: SpaceParams, M_list: Iterable[int]) -> list[float]:
    """Distances ``||lambda - lambda^(M)||`` for each ``M``."""
    return [norm(lam - cutoff(lam, M), P) for M in M_list]


def lift_seq(lam: Sequence, sigma: float) -> Sequence:
    """``(lift lambda)_{j,k} = 2^{j sigma} lambda_{j,k}``; an isometry from s onto s - sigma."""
    return lam.map_levels(lambda j, a: a * 2.0 ** (j * sigma))


# --------------------------------------------------------------------------
# text IO:  optional header ``window d J K``, then ``j k_1 ... k_d re [im]``


def write_sequence(lam: Sequence, fh: TextIO) -> None:
    win = lam.window
    fh.write(f"window {win.d} {win.j_max} {win.half_extent}\n")
    for idx, val in lam.entries().items():
        head = " ".join(str(v) for v in (idx.j, *idx.k))
        if isinstance(val, complex):
            fh.write(f"{head} {val.real!r} {val.imag!r}\n")
        else:
            fh.write(f"{head} {float(val)!r}\n")


def read_sequence(fh: Iterable[str], window: Window | None = None) -> Sequence:
    entries = {}
    for line in fh:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "window":
            window = Window(int(parts[1]), int(parts[2]), int(parts[3]))
            continue
        if window is None:
            raise ParameterError("sequence file needs a 'window d J K' header or an explicit window")
        d = window.d
        if len(parts) not in (d + 2, d + 3):
            raise ParameterError(f"malformed sequence record: {line!r}")
        j = int(parts[0])
        k = tuple(int(v) for v in parts[1:1 + d])
        re = float(parts[1 + d])
        val = complex(re, float(parts[2 + d])) if len(parts) == d + 3 else re
        entries[DyadicIndex(j, k)] = val
    if window is None:
        raise ParameterError("empty sequence file without a window")
    return Sequence.from_entries(window, entries)
