"""Weights, per-cell masses, Muckenhoupt constants and weight comparability.

Every weight reduces to a normal form

    c * |x|^alpha_r * |x_1|^alpha_a * exp(rate |x|) * prod_i rho_i(x)^e_i

where the ``rho_i`` are cell-averaged densities of :class:`CellMeasure`
weights.  Masses are integrals of that normal form; products and powers of
weights therefore stay inside the same family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterable, TextIO

import numpy as np

from . import _quadrature as quad
from .dyadic import Window, as_index, block_sum, cube_bounds
from .errors import DivergentIntegralError, ParameterError, WindowError

__all__ = [
    "Weight",
    "Constant",
    "Power",
    "Exponential",
    "PowerProduct",
    "CellMeasure",
    "cell_mass",
    "level_masses",
    "finest_masses",
    "combine",
    "combine_exponents",
    "BallSample",
    "local_balls",
    "global_balls",
    "ApEstimate",
    "ap_constant",
    "w_class_ratio",
    "read_cell_measure",
    "write_cell_measure",
]

DEFAULT_TOL = 1e-8
DIVERGENCE_CAP = 1e12
GROWTH_FACTOR = 1.5


# --------------------------------------------------------------------------
# normal form


@dataclass(frozen=True)
class _NormalForm:
    c: float = 1.0
    alpha_r: float = 0.0
    alpha_a: float = 0.0
    rate: float = 0.0
    cells: tuple = ()  # ((CellMeasure, exponent), ...)

    def __pow__(self, t: float) -> "_NormalForm":
        return _NormalForm(self.c**t, self.alpha_r * t, self.alpha_a * t,
                           self.rate * t, tuple((cm, e * t) for cm, e in self.cells))

    def __mul__(self, other: "_NormalForm") -> "_NormalForm":
        return _NormalForm(self.c * other.c, self.alpha_r + other.alpha_r,
                           self.alpha_a + other.alpha_a, self.rate + other.rate,
                           self.cells + other.cells)

    @property
    def analytic_trivial(self) -> bool:
        return self.alpha_r == 0 and self.alpha_a == 0 and self.rate == 0

    def cell_window(self) -> Window | None:
        wins = {cm.window for cm, e in self.cells if e != 0}
        if len(wins) > 1:
            raise ParameterError("cell-measure factors live on different windows")
        return wins.pop() if wins else None

    def cell_density(self) -> np.ndarray | float:
        """Product of powered cell densities on the finest cells of the cell window."""
        dens = 1.0
        for cm, e in self.cells:
            if e != 0:
                dens = dens * cm.density ** e
        return dens

    def analytic(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        out = np.full(x.shape[:-1], self.c)
        if self.alpha_r or self.rate:
            r = np.sqrt((x**2).sum(axis=-1))
            if self.alpha_r:
                with np.errstate(divide="ignore"):
                    out = out * r**self.alpha_r
            if self.rate:
                out = out * np.exp(self.rate * r)
        if self.alpha_a:
            with np.errstate(divide="ignore"):
                out = out * np.abs(x[..., 0]) ** self.alpha_a
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = self.analytic(x)
        win = self.cell_window()
        if win is not None:
            out = out * _lookup(win, self.cell_density(), x)
        return out

    # -- integration of the analytic part ---------------------------------

    def _check_singular(self, lo, hi):
        d = len(lo)
        touches_origin = all(l <= 0.0 <= h for l, h in zip(lo, hi))
        touches_plane = lo[0] <= 0.0 <= hi[0]
        if d == 1:
            if touches_origin and self.alpha_r + self.alpha_a <= -1:
                raise DivergentIntegralError("power weight not integrable at 0")
            return
        if touches_plane and self.alpha_a <= -1:
            raise DivergentIntegralError("coordinate power weight not integrable at x_1 = 0")
        if touches_origin and self.alpha_r + min(self.alpha_a, 0.0) <= -d:
            raise DivergentIntegralError("radial power weight not integrable at 0")

    def integrate_analytic(self, lo, hi, tol: float = DEFAULT_TOL) -> float:
        lo = [float(v) for v in lo]
        hi = [float(v) for v in hi]
        if any(h <= l for l, h in zip(lo, hi)):
            return 0.0
        self._check_singular(lo, hi)
        d = len(lo)
        if d == 1:
            return self.c * quad.interval(lo[0], hi[0], self.alpha_r + self.alpha_a, self.rate)
        if self.alpha_r == 0 and self.rate == 0:
            rest = math.prod(h - l for l, h in zip(lo[1:], hi[1:]))
            return self.c * quad.interval(lo[0], hi[0], self.alpha_a, 0.0) * rest
        val = quad.adaptive_boxes(self.analytic, np.array([lo]), np.array([hi]), tol)
        return float(val[0])

    def integrate(self, lo, hi, tol: float = DEFAULT_TOL) -> float:
        """Integral over the box ``prod [lo_i, hi_i)``."""
        win = self.cell_window()
        if win is None:
            return self.integrate_analytic(lo, hi, tol)
        return _integrate_with_cells(self, win, lo, hi, tol)

    def finest_masses(self, window: Window, tol: float = DEFAULT_TOL) -> np.ndarray:
        win = self.cell_window()
        if win is not None and win != window:
            raise ParameterError(f"cell-measure weight lives on {win}, not on {window}")
        vol = window.cell_volume(window.j_max)
        if self.analytic_trivial:
            base = np.full(window.finest_shape, self.c * vol)
        else:
            base = _analytic_finest(self, window, tol)
        if win is not None:
            base = base * self.cell_density()
        return base


def _analytic_finest(nf: _NormalForm, window: Window, tol: float) -> np.ndarray:
    lo = window.finest_lower_corners().reshape(-1, window.d)
    h = 2.0**-window.j_max
    hi = lo + h
    if window.d == 1 or (nf.alpha_r == 0 and nf.rate == 0):
        vals = np.array([nf.integrate_analytic(a, b, tol) for a, b in zip(lo, hi)])
        return vals.reshape(window.finest_shape)
    # check singular cells first so divergence is reported, then batch the rest
    for a, b in zip(lo, hi):
        if np.all(a <= 0) and np.all(b >= 0) or (a[0] <= 0 <= b[0]):
            nf._check_singular(list(a), list(b))
    vals = quad.adaptive_boxes(nf.analytic, lo, hi, tol)
    return vals.reshape(window.finest_shape)


def _lookup(window: Window, table, x: np.ndarray) -> np.ndarray:
    """Value of a finest-cell table at points ``x`` (shape ``(..., d)``)."""
    x = np.asarray(x, float)
    if np.isscalar(table) or np.ndim(table) == 0:
        return np.full(x.shape[:-1], float(table))
    J, off = window.j_max, window.offset(window.j_max)
    pos = np.floor(x * 2**J).astype(int) + off
    if np.any(pos < 0) or np.any(pos >= window.side(J)):
        raise WindowError("point outside the cell-measure window")
    return table[tuple(pos[..., i] for i in range(window.d))]


def _integrate_with_cells(nf: _NormalForm, win: Window, lo, hi, tol) -> float:
    J, off, h = win.j_max, win.offset(win.j_max), 2.0**-win.j_max
    K = win.half_extent
    if any(l < -K or hi_ > K for l, hi_ in zip(lo, hi)):
        raise WindowError("integration box leaves the cell-measure window")
    dens = nf.cell_density()
    ranges, overlaps = [], []
    for l, u in zip(lo, hi):
        i0 = int(math.floor(l / h)) + off
        i1 = int(math.ceil(u / h)) + off
        idx = np.arange(i0, i1)
        cl = (idx - off) * h
        ov = np.clip(np.minimum(cl + h, u) - np.maximum(cl, l), 0.0, None)
        ranges.append(idx)
        overlaps.append(ov)
    sub = dens[np.ix_(*ranges)]
    if nf.analytic_trivial:
        ovol = overlaps[0]
        for ov in overlaps[1:]:
            ovol = np.multiply.outer(ovol, ov)
        return float(nf.c * (sub * ovol).sum())
    total = 0.0
    for pos in product(*[range(len(r)) for r in ranges]):
        cell_lo = [max((ranges[a][pos[a]] - off) * h, lo[a]) for a in range(win.d)]
        cell_hi = [min((ranges[a][pos[a]] - off) * h + h, hi[a]) for a in range(win.d)]
        total += sub[pos] * nf.integrate_analytic(cell_lo, cell_hi, tol)
    return total


# --------------------------------------------------------------------------
# public weight types


class Weight:
    """Base class: a nonnegative locally integrable function on R^d."""

    def normal_form(self) -> _NormalForm:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        """Pointwise values at points ``x`` of shape ``(..., d)``."""
        return self.normal_form()(np.asarray(x, float))

    def power(self, t: float) -> "Weight":
        return PowerProduct(((self, float(t)),))

    def integrate(self, lo, hi, tol: float = DEFAULT_TOL) -> float:
        return self.normal_form().integrate(lo, hi, tol)


@dataclass(frozen=True)
class Constant(Weight):
    c: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ParameterError("constant weight must be positive and finite")

    def normal_form(self):
        return _NormalForm(c=float(self.c))


@dataclass(frozen=True)
class Power(Weight):
    """``|x|^alpha`` (radial) or ``|x_1|^alpha`` when ``axis`` is set."""

    alpha: float
    axis: bool = False

    def normal_form(self):
        if self.axis:
            return _NormalForm(alpha_a=float(self.alpha))
        return _NormalForm(alpha_r=float(self.alpha))


@dataclass(frozen=True)
class Exponential(Weight):
    """``exp(a |x|)``."""

    a: float

    def normal_form(self):
        return _NormalForm(rate=float(self.a))


@dataclass(frozen=True)
class PowerProduct(Weight):
    """Pointwise product ``prod_i w_i^{e_i}``."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors",
                           tuple((w, float(e)) for w, e in self.factors))

    def normal_form(self):
        nf = _NormalForm()
        for w, e in self.factors:
            nf = nf * (w.normal_form() ** e)
        return nf


@dataclass(frozen=True, eq=False)
class CellMeasure(Weight):
    """A weight known only through its masses on the finest cells of a window."""

    window: Window
    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.shape != self.window.finest_shape:
            raise ParameterError(f"masses must have shape {self.window.finest_shape}")
        if not (np.all(m > 0) and np.all(np.isfinite(m))):
            raise ParameterError("cell masses must be strictly positive and finite")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.window.cell_volume(self.window.j_max)

    def normal_form(self):
        return _NormalForm(cells=((self, 1.0),))


# --------------------------------------------------------------------------
# masses


@lru_cache(maxsize=512)
def _level_masses(w: Weight, window: Window, tol: float) -> tuple:
    fin = w.normal_form().finest_masses(window, tol)
    out = [None] * (window.j_max + 1)
    for j in range(window.j_max + 1):
        arr = block_sum(fin, 2 ** (window.j_max - j))
        arr.setflags(write=False)
        out[j] = arr
    return tuple(out)


def level_masses(w: Weight, window: Window, tol: float = DEFAULT_TOL) -> tuple:
    """Masses ``w(Q_{j,k})`` of all in-window cubes, one array per level.

    Coarse masses are exact sums of finest-cell masses.
    """
    return _level_masses(w, window, tol)


def finest_masses(w: Weight, window: Window, tol: float = DEFAULT_TOL) -> np.ndarray:
    return level_masses(w, window, tol)[window.j_max]


def cell_mass(w: Weight, idx, window: Window | None = None, tol: float = DEFAULT_TOL) -> float:
    """``w(Q_{j,k})``, the integral of the weight over one dyadic cube."""
    idx = as_index(idx)
    nf = w.normal_form()
    if nf.cell_window() is not None:
        window = window or nf.cell_window()
        window.check(idx)
        return float(level_masses(w, window, tol)[idx.j][window.position(idx)])
    bounds = cube_bounds(idx)
    return nf.integrate([b[0] for b in bounds], [b[1] for b in bounds], tol)


# --------------------------------------------------------------------------
# combination


def combine_exponents(theta: float, p0: float, p1: float) -> tuple[float, float]:
    """Exponents ``((1-theta) p/p0, theta p/p1)`` with the infinity conventions."""
    if not 0 < theta < 1:
        raise ParameterError("theta must lie in (0, 1)")
    inf0, inf1 = math.isinf(p0), math.isinf(p1)
    if inf0 and inf1:
        return 0.0, 0.0
    if inf1:
        return 1.0, 0.0
    if inf0:
        return 0.0, 1.0
    p = 1.0 / ((1 - theta) / p0 + theta / p1)
    return (1 - theta) * p / p0, theta * p / p1


def combine(w0: Weight, w1: Weight, theta: float, p0: float, p1: float) -> Weight:
    """The interpolated weight ``w0^{(1-theta)p/p0} w1^{theta p/p1}``."""
    a, b = combine_exponents(theta, p0, p1)
    if a == 0 and b == 0:
        return Constant(1.0)
    if b == 0:
        return w0
    if a == 0:
        return w1
    return PowerProduct(((w0, a), (w1, b)))


# --------------------------------------------------------------------------
# Muckenhoupt constants


@dataclass(frozen=True)
class BallSample:
    """Refinement groups of balls ``(center, radius)``; balls are sup-norm balls."""

    groups: tuple

    @property
    def n_balls(self) -> int:
        return sum(len(g) for g in self.groups)


def _grid(d, extent, spacing, max_per_axis):
    n = int(round(extent / spacing))
    if 2 * n + 1 > max_per_axis:
        n = max_per_axis // 2
        spacing = extent / n
    ax = np.arange(-n, n + 1) * spacing
    return [tuple(c) for c in product(ax, repeat=d)]


def local_balls(d: int = 1, levels: int = 8, extent: float = 2.0) -> BallSample:
    """Balls of radius ``2^-n`` (volume <= 1), ``n = 1..levels``, centers on a dyadic grid."""
    max_axis = 4097 if d == 1 else 33
    groups = []
    for n in range(1, levels + 1):
        r = 2.0**-n
        groups.append(tuple((c, r) for c in _grid(d, extent, r, max_axis)))
    return BallSample(tuple(groups))


def global_balls(d: int = 1, m_max: int = 10, m_min: int = 1) -> BallSample:
    """Balls of radius ``2^m``, ``m = m_min..m_max``, centered at ``0`` and ``+-2^m``."""
    groups = []
    for m in range(m_min, m_max + 1):
        r = 2.0**m
        groups.append(tuple((c, r) for c in _grid(d, r, r, 3)))
    return BallSample(tuple(groups))


@dataclass(frozen=True)
class ApEstimate:
    p: float
    constant: float
    n_balls: int
    scope: str
    diverging: bool
    history: tuple = ()


def _ap_expression(w_nf, dual_nf, center, r, p):
    d = len(center)
    lo = [c - r for c in center]
    hi = [c + r for c in center]
    vol = (2 * r) ** d
    with np.errstate(over="ignore"):
        aw = w_nf.integrate(lo, hi) / vol
        av = dual_nf.integrate(lo, hi) / vol
        return aw ** (1 / p) * av ** (1 - 1 / p)


def ap_constant(w: Weight, p: float, balls: BallSample | None = None, local: bool = True,
                cap: float = DIVERGENCE_CAP, growth: float = GROWTH_FACTOR,
                d: int = 1) -> ApEstimate:
    """Lower bound for ``A_p(w)`` (or the local constant) by sampling balls.

    ``history`` records the running maximum after each refinement group.  The
    estimate is flagged as diverging when a needed integral diverges, the
    running maximum exceeds ``cap``, or it grew by at least ``growth`` across
    each of the last three refinements.
    """
    if not 1 < p < math.inf:
        raise ParameterError("A_p constants need 1 < p < inf")
    if balls is None:
        balls = local_balls(d) if local else global_balls(d)
    nf = w.normal_form()
    dual = nf ** (-1.0 / (p - 1.0))
    best, history, count = 0.0, [], 0
    diverging = False
    for group in balls.groups:
        for center, r in group:
            dim = len(center)
            if local and (2 * r) ** dim > 1 + 1e-15:
                raise ParameterError("local estimates only admit balls of volume <= 1")
            try:
                val = _ap_expression(nf, dual, center, r, p)
            except DivergentIntegralError:
                val = math.inf
            count += 1
            if not math.isfinite(val):
                val = math.inf
            best = max(best, val)
        history.append(best)
        if best > cap:
            diverging = True
    if len(history) >= 4:
        last = history[-4:]
        if all(b >= growth * a for a, b in zip(last, last[1:])):
            diverging = True
    return ApEstimate(p=p, constant=best, n_balls=count,
                      scope="local" if local else "global",
                      diverging=diverging, history=tuple(history))


# --------------------------------------------------------------------------
# comparability of integrated and combined weights


def w_class_ratio(w0: Weight, w1: Weight, theta: float, p0: float, p1: float,
                  window: Window, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Min and max over in-window cubes of ``w(Q) / (w0(Q)^a w1(Q)^b)``.

    ``w`` is the combined weight and ``a, b`` its exponents; the maximum never
    exceeds 1 by Hoelder's inequality.
    """
    a, b = combine_exponents(theta, p0, p1)
    w = combine(w0, w1, theta, p0, p1)
    mw = level_masses(w, window, tol)
    m0 = level_masses(w0, window, tol)
    m1 = level_masses(w1, window, tol)
    lo, hi = math.inf, 0.0
    for j in range(window.j_max + 1):
        ratio = mw[j] / (m0[j] ** a * m1[j] ** b)
        lo = min(lo, float(ratio.min()))
        hi = max(hi, float(ratio.max()))
    return lo, hi


# --------------------------------------------------------------------------
# text IO:  header ``window d J K``, then ``j k_1 ... k_d mass`` per finest cell


def write_cell_measure(cm: CellMeasure, fh: TextIO) -> None:
    win = cm.window
    fh.write(f"window {win.d} {win.j_max} {win.half_extent}\n")
    for idx in win.indices(win.j_max):
        val = cm.masses[win.position(idx)]
        fh.write(" ".join(str(v) for v in (idx.j, *idx.k)) + f" {float(val)!r}\n")


def _parse_table(lines: Iterable[str]):
    window, rows = None, []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "window":
            window = Window(int(parts[1]), int(parts[2]), int(parts[3]))
            continue
        rows.append(parts)
    if window is None:
        raise ParameterError("missing 'window d J K' header")
    return window, rows


def read_cell_table(fh: Iterable[str]) -> tuple[Window, np.ndarray]:
    """Parse a finest-cell table into its window and a dense value array."""
    window, rows = _parse_table(fh)
    vals = np.full(window.finest_shape, np.nan)
    for parts in rows:
        j = int(parts[0])
        k = tuple(int(v) for v in parts[1:1 + window.d])
        if j != window.j_max:
            raise ParameterError("cell tables list finest-level cells only")
        vals[window.position((j, k))] = float(parts[1 + window.d])
    if np.isnan(vals).any():
        raise ParameterError("cell table does not cover every finest cell")
    return window, vals


def read_cell_measure(fh: Iterable[str]) -> CellMeasure:
    window, vals = read_cell_table(fh)
    return CellMeasure(window, vals)
