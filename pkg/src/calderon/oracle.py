"""Brute-force Calderón-product quasi-norm on small supports.

Every admissible pair is ``lambda0 = |lambda| r^theta``,
``lambda1 = |lambda| r^-(1-theta)`` with one ratio ``r > 0`` per support
index.  In ``x = log r`` the objective

    (1 - theta) log ||lambda0||_0 + theta log ||lambda1||_1

is a composition of log-sum-exp maps, hence convex, and invariant under
``x -> x + c``.  It is minimized by multi-start cyclic coordinate descent
with golden-section line searches.  The best start is polished by BFGS, or,
when a norm involves a maximum, by SLSQP on the epigraph form in which each
maximum becomes an auxiliary variable with linear or smooth constraints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .dyadic import DyadicIndex, upsample
from .errors import ParameterError
from .sequences import Sequence, SpaceParams, YTable, norm
from .weights import level_masses

__all__ = ["OracleResult", "oracle_calderon_norm"]

DEFAULT_CAP = 8
_LN2 = math.log(2.0)


def _is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


@dataclass(frozen=True, eq=False)
class OracleResult:
    value: float
    norm_target: float
    ratios: dict = field(repr=False)
    lam0: Sequence = field(repr=False)
    lam1: Sequence = field(repr=False)
    evaluations: int = 0

    @property
    def constant(self) -> float:
        return self.value / self.norm_target if self.norm_target else 1.0


def _lse(a: np.ndarray, mask: np.ndarray | None = None, axis=-1) -> np.ndarray:
    """``log sum exp`` over ``axis``, restricted to ``mask``; empty rows give ``-inf``."""
    if mask is not None:
        a = np.where(mask, a, -np.inf)
    m = a.max(axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(a - safe).sum(axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


class _LogNorm:
    """``log ||c||_P`` for sequences supported on a fixed index list, given ``log|c|``."""

    def __init__(self, support: list[DyadicIndex], lam: Sequence, P: SpaceParams):
        win = lam.window
        self.P = P
        self.shift = np.array([idx.j * P.s * _LN2 for idx in support])
        if P.scale == "F":
            self._init_f(support, win, P)
        else:
            self._init_b(support, win, P)

    def _init_f(self, support, win, P):
        J = win.j_max
        code = np.zeros(win.finest_shape, dtype=np.int64)
        for i, idx in enumerate(support):
            lev = np.zeros(win.level_shape(idx.j), dtype=np.int64)
            lev[win.position(idx)] = 1 << i
            code |= upsample(lev, 2 ** (J - idx.j))
        masses = level_masses(P.weight, win)[J]
        pats, inv = np.unique(code.ravel(), return_inverse=True)
        pm = np.bincount(inv, weights=masses.ravel())
        keep = pats != 0
        pats, pm = pats[keep], pm[keep]
        self.B = ((pats[:, None] >> np.arange(len(support))[None, :]) & 1).astype(bool)
        self.logm = np.log(pm)

    def _init_b(self, support, win, P):
        levels = sorted({idx.j for idx in support})
        self.G = np.array([[idx.j == j for idx in support] for j in levels])
        if _is_inf(P.p):
            self.logy = np.zeros(len(support))
        else:
            table = P.weight.levels if isinstance(P.weight, YTable) else level_masses(P.weight, win)
            y = np.array([table[idx.j][win.position(idx)] for idx in support])
            if np.isnan(y).any():
                raise ParameterError("y-table misses an entry on the support")
            self.logy = np.log(y)

    @property
    def nonsmooth(self) -> bool:
        if self.P.scale == "F":
            return _is_inf(self.P.q)
        return _is_inf(self.P.p) or _is_inf(self.P.q)

    def epigraph(self, n: int):
        """Smooth reformulation: ``(n_aux, value(z, a), cons(z, a) >= 0, aux0(z))``.

        Each maximum is replaced by an auxiliary variable bounding its entries.
        """
        p, q = self.P.p, self.P.q
        if self.P.scale == "F":
            B = self.B
            rows, cols = np.nonzero(B)

            def value(z, a):
                return float(_lse(p * a + self.logm)) / p

            def cons(z, a):
                return a[rows] - (z + self.shift)[cols]

            def aux0(z):
                return np.where(B, (z + self.shift)[None, :], -np.inf).max(axis=1)

            return len(B), value, cons, aux0
        G = self.G
        if _is_inf(p):
            rows, cols = np.nonzero(G)
            if _is_inf(q):
                def value(z, a):
                    return float(a[0])

                def cons(z, a):
                    return a[0] - (z + self.shift)

                def aux0(z):
                    return np.array([(z + self.shift).max()])

                return 1, value, cons, aux0

            def value(z, a):
                return float(_lse(q * a)) / q

            def cons(z, a):
                return a[rows] - (z + self.shift)[cols]

            def aux0(z):
                return np.where(G, (z + self.shift)[None, :], -np.inf).max(axis=1)

            return len(G), value, cons, aux0

        def inner(z):
            return _lse(p * (z + self.shift)[None, :] + self.logy[None, :], G) / p

        def value(z, a):
            return float(a[0])

        def cons(z, a):
            return a[0] - inner(z)

        def aux0(z):
            return np.array([inner(z).max()])

        return 1, value, cons, aux0

    def __call__(self, z: np.ndarray) -> float:
        z = z + self.shift
        p, q = self.P.p, self.P.q
        if self.P.scale == "F":
            if _is_inf(q):
                inner = np.where(self.B, z[None, :], -np.inf).max(axis=1)
            else:
                inner = _lse(q * z[None, :], self.B) / q
            return float(_lse(p * inner + self.logm)) / p
        if _is_inf(p):
            inner = np.where(self.G, z[None, :], -np.inf).max(axis=1)
        else:
            inner = _lse(p * z[None, :] + self.logy[None, :], self.G) / p
        if _is_inf(q):
            return float(inner.max())
        return float(_lse(q * inner)) / q


def _golden(fun, x: np.ndarray, i: int, direction=None, xtol=1e-10):
    """Line search along coordinate ``i`` (or ``direction``) from ``x``."""
    d = np.zeros_like(x) if direction is None else direction
    if direction is None:
        d[i] = 1.0

    def phi(t):
        return fun(x + t * d)

    try:
        res = optimize.minimize_scalar(phi, bracket=(0.0, 0.5), method="golden",
                                       options={"xtol": xtol})
        t, val = res.x, res.fun
    except (RuntimeError, ValueError):
        return x, fun(x)
    base = fun(x)
    if not np.isfinite(val) or val >= base:
        return x, base
    return x + t * d, val


def _epigraph_polish(N0: "_LogNorm", N1: "_LogNorm", loga, t: float, x0: np.ndarray):
    """SLSQP on the smooth epigraph form of the objective; returns ``x``."""
    n = len(x0)
    parts = []
    for N, sign in ((N0, t), (N1, t - 1)):
        if N.nonsmooth:
            parts.append((N, sign) + N.epigraph(n))
        else:
            parts.append((N, sign, 0, None, None, None))

    def split(v):
        x, out, pos = v[:n], [], n
        for part in parts:
            out.append(v[pos:pos + part[2]])
            pos += part[2]
        return x, out

    def objective(v):
        x, auxs = split(v)
        total = 0.0
        for (N, sign, k, value, _, _), a, wt in zip(parts, auxs, (1 - t, t)):
            z = loga + sign * x
            total += wt * (value(z, a) if k else N(z))
        return total

    def constraints(v):
        x, auxs = split(v)
        out = [np.zeros(0)]
        for (N, sign, k, _, cons, _), a in zip(parts, auxs):
            if k:
                out.append(np.atleast_1d(cons(loga + sign * x, a)))
        return np.concatenate(out)

    v0 = [x0]
    for N, sign, k, _, _, aux0 in parts:
        if k:
            v0.append(aux0(loga + sign * x0) + 1e-9)
    res = optimize.minimize(objective, np.concatenate(v0), method="SLSQP",
                            constraints=[{"type": "ineq", "fun": constraints}],
                            options={"ftol": 1e-15, "maxiter": 2000})
    return res.x[:n]


def _descend(fun, x, tol, max_rounds, xtol):
    """Cyclic coordinate sweeps until the relative improvement drops below ``tol``."""
    f = fun(x)
    for _ in range(max_rounds):
        prev = f
        for i in range(len(x)):
            x, f = _golden(fun, x, i, xtol=xtol)
        # f is a log value, so differences are relative improvements
        if prev - f < tol:
            break
    return x, f


def oracle_calderon_norm(lam: Sequence, P0: SpaceParams, P1: SpaceParams, theta,
                         tol: float = 1e-6, starts: int = 8, seed: int = 0,
                         cap: int = DEFAULT_CAP, max_rounds: int = 200) -> OracleResult:
    """Approximate ``inf ||lambda0||^(1-theta) ||lambda1||^theta`` over exact factorizations."""
    if P0.scale != P1.scale:
        raise ParameterError("endpoint spaces must share a scale")
    from .factorization import target_params

    t = float(theta)
    if not 0 < t < 1:
        raise ParameterError("theta must lie in (0, 1)")
    support = lam.support()
    n = len(support)
    if n > cap:
        raise ParameterError(f"support size {n} exceeds the oracle cap {cap}")
    target = norm(lam, target_params(P0, P1, theta))
    if n == 0:
        z = Sequence.zeros(lam.window)
        return OracleResult(0.0, target, {}, z, z, 0)
    loga = np.log(np.array([abs(lam[idx]) for idx in support]))
    N0, N1 = _LogNorm(support, lam, P0), _LogNorm(support, lam, P1)
    count = [0]

    def fun(x):
        count[0] += 1
        return (1 - t) * N0(loga + t * x) + t * N1(loga - (1 - t) * x)

    nonsmooth = N0.nonsmooth or N1.nonsmooth
    rng = np.random.default_rng(seed)
    inits = [np.zeros(n)] + [rng.uniform(-4.0, 4.0, n) for _ in range(starts)]
    # cheap descent from every start, then a tight polish of the best one
    best_x, best_f = None, math.inf
    for x in inits:
        x, f = _descend(fun, x, tol, max_rounds, xtol=1e-5)
        if f < best_f:
            best_x, best_f = x, f
    x, f = best_x, best_f
    if nonsmooth:
        cand = _epigraph_polish(N0, N1, loga, t, x)
    else:
        cand = optimize.minimize(fun, x, method="BFGS", options={"gtol": 1e-12}).x
    fc = fun(cand)
    if fc < f:
        x, f = cand, fc
    best_x, best_f = _descend(fun, x, tol * 1e-6, max_rounds, xtol=1e-10)
    ratios = {idx: float(math.exp(v)) for idx, v in zip(support, best_x)}
    lam0 = Sequence.from_entries(lam.window, {
        idx: abs(lam[idx]) * r**t for idx, r in ratios.items()})
    lam1 = Sequence.from_entries(lam.window, {
        idx: abs(lam[idx]) * r ** (t - 1) for idx, r in ratios.items()})
    return OracleResult(math.exp(best_f), target, ratios, lam0, lam1, count[0])
