"""Calderón-product factorizations of dyadic sequences and cell functions.

Given ``lambda`` in a target space ``X`` between ``X0`` and ``X1`` the goal is
a pair ``(lambda0, lambda1)`` with ``|lambda| = |lambda0|^(1-theta) |lambda1|^theta``
and ``||lambda0||^(1-theta) ||lambda1||^theta`` as close to ``||lambda||`` as
possible.  The product is never below ``||lambda||`` (Hölder), so the ratio
``achieved_constant`` is at least one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicIndex, Window, upsample
from .errors import DegenerateFactorizationError, ParameterError
from .maximal import CellFunction
from .sequences import (
    Sequence,
    SpaceParams,
    YTable,
    b_norm_y,
    exponent_ratio,
    interpolate_params,
    norm,
    stack,
)
from .weights import Weight, combine, combine_exponents, finest_masses

__all__ = [
    "Factorization",
    "HolderCheck",
    "LevelSets",
    "LpFactorization",
    "FExponents",
    "target_params",
    "holder_product_bound",
    "lp_factorize",
    "f_exponents",
    "build_level_sets",
    "f_factorize",
    "b_factorize",
    "verify_factorization",
]

_NO_CLASS = np.iinfo(np.int64).min
_GAMMA_EPS = 1e-12


def _is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


def _fl(x) -> float:
    return float(x)


# --------------------------------------------------------------------------
# target parameters and the Hölder direction


def target_params(P0: SpaceParams, P1: SpaceParams, theta) -> SpaceParams:
    """Interpolated parameters with the combined weight (or combined y-table)."""
    if P0.scale != P1.scale:
        raise ParameterError("endpoint spaces must share a scale")
    s, p, q = interpolate_params(P0, P1, theta)
    y0, y1 = isinstance(P0.weight, YTable), isinstance(P1.weight, YTable)
    if y0 != y1:
        raise ParameterError("mix of y-table and weight endpoints")
    if y0:
        w = YTable.combine(P0.weight, P1.weight, _fl(theta), P0.p, P1.p)
    else:
        w = combine(P0.weight, P1.weight, _fl(theta), P0.p, P1.p)
    return SpaceParams(_fl(s), _fl(p) if not _is_inf(p) else p,
                       _fl(q) if not _is_inf(q) else q, P0.scale, w)


def _pow_abs(a: np.ndarray, e: float) -> np.ndarray:
    """``|a|^e`` on the support of ``a`` and zero elsewhere (also for ``e = 0``)."""
    m = np.abs(a)
    out = np.zeros(m.shape)
    nz = m > 0
    out[nz] = m[nz] ** e
    return out


@dataclass(frozen=True)
class HolderCheck:
    product: Sequence
    lhs_norm: float
    rhs: float
    ok: bool


def holder_product_bound(lam0: Sequence, lam1: Sequence, theta, P0: SpaceParams,
                         P1: SpaceParams, P: SpaceParams | None = None,
                         tol: float = 1e-10) -> HolderCheck:
    """Check ``||lam0^(1-t) lam1^t||_P <= ||lam0||_P0^(1-t) ||lam1||_P1^t``."""
    if lam0.window != lam1.window:
        raise ParameterError("sequences live on different windows")
    if P is None:
        P = target_params(P0, P1, theta)
    elif P.scale != P0.scale or P0.scale != P1.scale:
        raise ParameterError("scale mismatch")
    t = _fl(theta)
    prod = Sequence(lam0.window, tuple(
        _pow_abs(a, 1 - t) * _pow_abs(b, t) for a, b in zip(lam0.levels, lam1.levels)))
    lhs = norm(prod, P)
    rhs = norm(lam0, P0) ** (1 - t) * norm(lam1, P1) ** t
    return HolderCheck(prod, lhs, rhs, bool(lhs <= rhs * (1 + tol)))


# --------------------------------------------------------------------------
# weighted L_p


@dataclass(frozen=True)
class LpFactorization:
    f0: CellFunction
    f1: CellFunction
    theta: float
    norm0: float
    norm1: float
    norm_target: float
    recon_err: float

    @property
    def achieved_constant(self) -> float:
        return _ratio(self.norm0, self.norm1, self.theta, self.norm_target)


def _ratio(n0, n1, theta, target):
    prod = n0 ** (1 - theta) * n1**theta
    if target == 0:
        return 1.0 if prod == 0 else math.inf
    return prod / target


def _lp(values: np.ndarray, masses: np.ndarray, p: float) -> float:
    if _is_inf(p):
        return float(values.max(initial=0.0))
    return float((values**p * masses).sum()) ** (1.0 / p)


def lp_factorize(f: CellFunction, w0: Weight, w1: Weight, theta, p0, p1) -> LpFactorization:
    """Exact factorization of ``L_p(w)`` between ``L_p0(w0)`` and ``L_p1(w1)``.

    Weight ratios use cell-averaged densities, and the target weight has density
    ``rho0^a rho1^b`` on every finest cell, so both identities hold to rounding.
    """
    t = _fl(theta)
    if not 0 < t < 1:
        raise ParameterError("theta must lie in (0, 1)")
    win = f.window
    vol = win.cell_volume(win.j_max)
    m0 = finest_masses(w0, win)
    m1 = finest_masses(w1, win)
    if (m0 <= 0).any() or (m1 <= 0).any():
        raise ParameterError("weight has a zero-mass cell")
    p = interpolate_exponent_float(p0, p1, t)
    a, b = combine_exponents(t, p0, p1)
    rho0, rho1 = m0 / vol, m1 / vol
    rho = rho0**a * rho1**b
    g = np.abs(f.values)
    if _is_inf(p0) and _is_inf(p1):
        g0 = g1 = g
    else:
        g0 = np.ones_like(g) if _is_inf(p0) else g ** (p / p0) * (rho / rho0) ** (1 / p0)
        g1 = np.ones_like(g) if _is_inf(p1) else g ** (p / p1) * (rho / rho1) ** (1 / p1)
    n0 = _lp(g0, m0, p0)
    n1 = _lp(g1, m1, p1)
    nt = _lp(g, rho * vol, p)
    rec = g0 ** (1 - t) * g1**t
    nz = g > 0
    err = float(np.max(np.abs(rec[nz] - g[nz]) / g[nz], initial=0.0))
    return LpFactorization(CellFunction(win, g0), CellFunction(win, g1), t, n0, n1, nt, err)


def interpolate_exponent_float(p0, p1, t: float) -> float:
    inv = (1 - t) * (0.0 if _is_inf(p0) else 1 / p0) + t * (0.0 if _is_inf(p1) else 1 / p1)
    return math.inf if inv == 0 else 1 / inv


# --------------------------------------------------------------------------
# the f-space construction


@dataclass(frozen=True)
class FExponents:
    """Exponents of the level-set construction, as floats."""

    s: float
    p: float
    q: float
    qr0: float  # q/q0 with the limit rules
    qr1: float
    gamma: float
    delta: float
    u: float
    v: float


def f_exponents(P0: SpaceParams, P1: SpaceParams, theta) -> FExponents:
    s, p, q = interpolate_params(P0, P1, theta)
    t = theta
    pr0, pr1 = p / P0.p, p / P1.p
    qr0, qr1 = exponent_ratio(q, P0.q), exponent_ratio(q, P1.q)
    gamma = pr0 - qr0
    delta = pr1 - qr1
    u = t * (P1.s * qr0 - P0.s * qr1)
    v = (1 - t) * (P0.s * qr1 - P1.s * qr0)
    return FExponents(*(_fl(x) for x in (s, p, q, qr0, qr1, gamma, delta, u, v)))


@dataclass(frozen=True, eq=False)
class LevelSets:
    """Super-level sets ``A_l`` of ``g`` and the cube classes ``C_l``.

    ``g`` and ``top`` are finest-cell arrays; ``top[m]`` is the largest ``l``
    with ``g(m) > 2^l``.  ``klass[j]`` holds, per level-``j`` cube, the unique
    ``l`` with ``|Q & A_l| > |Q|/2 >= |Q & A_{l+1}|`` (or a sentinel).
    """

    window: Window
    g: np.ndarray = field(repr=False)
    top: np.ndarray = field(repr=False)
    klass: tuple = field(repr=False)
    l_min: int
    l_max: int

    NO_CLASS = _NO_CLASS

    @property
    def empty(self) -> bool:
        return self.l_min > self.l_max

    def levels(self) -> range:
        return range(self.l_min, self.l_max + 1)

    def A(self, ell: int) -> np.ndarray:
        """Boolean finest-cell mask of ``{g > 2^ell}``."""
        return self.g > np.ldexp(1.0, ell)

    def C(self, ell: int) -> list[DyadicIndex]:
        out = []
        for j, cls in enumerate(self.klass):
            for pos in zip(*np.nonzero(cls == ell)):
                out.append(self.window.index_at(j, pos))
        return out

    def class_of(self, idx) -> int | None:
        idx = self.window.check(idx)
        v = int(self.klass[idx.j][self.window.position(idx)])
        return None if v == _NO_CLASS else v

    def uncaptured(self, lam: Sequence) -> list[DyadicIndex]:
        """Support indices of ``lam`` lying in no class."""
        out = []
        for j, (a, cls) in enumerate(zip(lam.levels, self.klass)):
            for pos in zip(*np.nonzero((a != 0) & (cls == _NO_CLASS))):
                out.append(self.window.index_at(j, pos))
        return out


def _top_level(g: np.ndarray) -> np.ndarray:
    """Largest integer ``l`` with ``g > 2^l`` for positive ``g``, sentinel elsewhere."""
    out = np.full(g.shape, _NO_CLASS, dtype=np.int64)
    pos = g > 0
    if not pos.any():
        return out
    gp = g[pos]
    L = (np.ceil(np.log2(gp)) - 1).astype(np.int64)
    for _ in range(3):
        up = np.ldexp(1.0, L + 1) < gp
        L[up] += 1
        down = np.ldexp(1.0, L) >= gp
        L[down] -= 1
    out[pos] = L
    return out


def _block_order_stat(top: np.ndarray, r: int, rank: int) -> np.ndarray:
    """Per block of side ``r``: the ``rank``-th largest entry (1-based)."""
    d = top.ndim
    shape = []
    for n in top.shape:
        shape += [n // r, r]
    blocks = top.reshape(shape)
    outer = tuple(range(0, 2 * d, 2))
    inner = tuple(range(1, 2 * d, 2))
    blocks = blocks.transpose(outer + inner).reshape(tuple(n // r for n in top.shape) + (-1,))
    n = blocks.shape[-1]
    # rank-th largest = (n - rank)-th smallest (0-based)
    return np.partition(blocks, n - rank, axis=-1)[..., n - rank]


def build_level_sets(lam: Sequence, P: SpaceParams, w0: Weight, exponent: float,
                     ratio: np.ndarray | None = None) -> LevelSets:
    """Level sets of ``g = S * (w/w0)^exponent`` with ``S`` the ``(s, q)`` stack of ``P``.

    ``ratio`` overrides the finest-cell mass ratio ``w/w0``.
    """
    win = lam.window
    J = win.j_max
    S = stack(lam, P.s, P.q)
    if ratio is None:
        ratio = finest_masses(P.weight, win) / finest_masses(w0, win)
    g = S * ratio**exponent if exponent != 0 else S.copy()
    top = _top_level(g)
    pos = g > 0
    if not pos.any():
        klass = tuple(np.full(win.level_shape(j), _NO_CLASS, dtype=np.int64) for j in range(J + 1))
        return LevelSets(win, g, top, klass, 0, -1)
    l_min = math.floor(math.log2(float(g[pos].min()))) - 1
    l_max = math.ceil(math.log2(float(g.max())))
    klass = []
    for j in range(J + 1):
        r = 2 ** (J - j)
        n = r**win.d
        klass.append(_block_order_stat(top, r, n // 2 + 1) if r > 1 else top.copy())
    return LevelSets(win, g, top, tuple(klass), l_min, l_max)


@dataclass(frozen=True, eq=False)
class Factorization:
    lam: Sequence = field(repr=False)
    lam0: Sequence = field(repr=False)
    lam1: Sequence = field(repr=False)
    theta: float
    P0: SpaceParams
    P1: SpaceParams
    P: SpaceParams
    norm0: float
    norm1: float
    norm_target: float
    achieved_constant: float
    recon_err: float
    status: str = "ok"
    branch: str = ""
    uncaptured: int = 0
    swapped: bool = False

    def to_record(self) -> dict:
        def num(x):
            x = float(x)
            return x if math.isfinite(x) else str(x)
        return {
            "theta": num(self.theta),
            "p0": num(self.P0.p), "q0": num(self.P0.q), "s0": num(self.P0.s),
            "p1": num(self.P1.p), "q1": num(self.P1.q), "s1": num(self.P1.s),
            "norm0": num(self.norm0), "norm1": num(self.norm1),
            "norm_target": num(self.norm_target),
            "achieved_constant": num(self.achieved_constant),
            "recon_err": num(self.recon_err),
            "scale": self.P.scale, "status": self.status, "branch": self.branch,
            "uncaptured": self.uncaptured,
        }


def _recon_err(lam: Sequence, lam0: Sequence, lam1: Sequence, theta: float) -> float:
    worst = 0.0
    for a, b0, b1 in zip(lam.levels, lam0.levels, lam1.levels):
        m = np.abs(a)
        nz = m > 0
        if nz.any():
            rec = _pow_abs(b0, 1 - theta)[nz] * _pow_abs(b1, theta)[nz]
            worst = max(worst, float(np.max(np.abs(rec - m[nz]) / m[nz])))
    return worst


def _assemble(lam, lam0, lam1, theta, P0, P1, P, **kw) -> Factorization:
    n0, n1, nt = norm(lam0, P0), norm(lam1, P1), norm(lam, P)
    return Factorization(lam, lam0, lam1, theta, P0, P1, P, n0, n1, nt,
                         _ratio(n0, n1, theta, nt), _recon_err(lam, lam0, lam1, theta), **kw)


def _branch(P0: SpaceParams, P1: SpaceParams) -> str:
    i0, i1 = _is_inf(P0.q), _is_inf(P1.q)
    if i0 and i1:
        return "q0=q1=inf"
    if i0:
        return "q1<q0=inf"
    if i1:
        return "q0<q1=inf"
    return "finite"


def _pointwise(lam: Sequence, ex: FExponents, klass=None) -> tuple[Sequence, Sequence]:
    levels0, levels1 = [], []
    for j, a in enumerate(lam.levels):
        e0 = _pow_abs(a, ex.qr0) * 2.0 ** (j * ex.u)
        e1 = _pow_abs(a, ex.qr1) * 2.0 ** (j * ex.v)
        if klass is not None:
            cls = klass[j]
            ok = cls != _NO_CLASS
            ell = np.where(ok, cls, 0).astype(float)
            e0 = np.where(ok, e0 * np.exp2(ell * ex.gamma), 0.0)
            e1 = np.where(ok, e1 * np.exp2(ell * ex.delta), 0.0)
        levels0.append(e0)
        levels1.append(e1)
    return Sequence(lam.window, tuple(levels0)), Sequence(lam.window, tuple(levels1))


def f_factorize(lam: Sequence, P0: SpaceParams, P1: SpaceParams, theta,
                oracle_cap: int = 8) -> Factorization:
    """Level-set factorization in the weighted ``f`` scale.

    When ``gamma = p/p0 - q/q0 < 0`` the endpoints are swapped (``theta -> 1 - theta``)
    and the outputs relabelled.  At ``gamma = 0`` with equal weights the
    pointwise formula is exact; with distinct weights the construction is
    undefined and the result carries status ``"degenerate-singular"``,
    computed by the brute-force minimizer when the support is small.
    """
    if P0.scale != "F" or P1.scale != "F":
        raise ParameterError("f_factorize needs two f-scale endpoints")
    if not 0 < theta < 1:
        raise ParameterError("theta must lie in (0, 1)")
    P = target_params(P0, P1, theta)
    ex = f_exponents(P0, P1, theta)
    t = _fl(theta)
    branch = _branch(P0, P1)
    if ex.gamma < -_GAMMA_EPS:
        F = f_factorize(lam, P1, P0, 1 - theta, oracle_cap)
        return Factorization(lam, F.lam1, F.lam0, t, P0, P1, P, F.norm1, F.norm0,
                             F.norm_target, _ratio(F.norm1, F.norm0, t, F.norm_target),
                             F.recon_err, F.status, branch, F.uncaptured, True)
    win = lam.window
    m0 = finest_masses(P0.weight, win)
    if abs(ex.gamma) <= _GAMMA_EPS:
        m1 = finest_masses(P1.weight, win)
        if np.allclose(m0, m1, rtol=1e-12, atol=0.0):
            lam0, lam1 = _pointwise(lam, ex)
            return _assemble(lam, lam0, lam1, t, P0, P1, P, status="degenerate", branch=branch)
        if lam.nnz > oracle_cap:
            raise DegenerateFactorizationError(
                "gamma = 0 with distinct weights: level sets undefined and "
                f"support {lam.nnz} exceeds the brute-force cap {oracle_cap}")
        from .oracle import oracle_calderon_norm
        res = oracle_calderon_norm(lam, P0, P1, theta, cap=oracle_cap)
        return _assemble(lam, res.lam0, res.lam1, t, P0, P1, P,
                         status="degenerate-singular", branch=branch)
    ratio = finest_masses(P.weight, win) / m0
    sets = build_level_sets(lam, P, P0.weight, 1.0 / (P0.p * ex.gamma), ratio=ratio)
    lam0, lam1 = _pointwise(lam, ex, sets.klass)
    missing = len(sets.uncaptured(lam))
    return _assemble(lam, lam0, lam1, t, P0, P1, P, branch=branch, uncaptured=missing,
                     status="ok" if missing == 0 else "uncaptured")


# --------------------------------------------------------------------------
# the b-space construction


def b_factorize(lam: Sequence, s0, p0, q0, s1, p1, q1, theta, y0: YTable, y1: YTable) -> Factorization:
    """Factorization in ``b^s_{p,q}(s-y)`` with constant exactly one.

    With ``y = y0^a y1^b`` and ``m_j`` the weighted ``l_p`` size of level ``j``
    of ``2^{js} lambda``, the choice

        lambda0 = 2^{-j s0} (2^{js}|lambda|)^{p/p0} (y/y0)^{1/p0} m_j^{q/q0 - p/p0}

    (and symmetrically ``lambda1``) makes every level of ``lambda0`` have size
    ``m_j^{q/q0}``, so the norm product equals ``||lambda||``.
    """
    if y0.window != lam.window or y1.window != lam.window:
        raise ParameterError("y-tables must live on the sequence window")
    for y in (y0, y1):
        for a, t_ in zip(lam.levels, y.levels):
            if np.any((a != 0) & np.isnan(t_)):
                raise ParameterError("y-table misses an entry on the support")
    P0 = SpaceParams(s0, p0, q0, "B", y0)
    P1 = SpaceParams(s1, p1, q1, "B", y1)
    P = target_params(P0, P1, theta)
    t = _fl(theta)
    s, p, q = P.s, P.p, P.q
    y = P.weight
    pr0, pr1 = exponent_ratio(p, p0), exponent_ratio(p, p1)
    qr0, qr1 = exponent_ratio(q, q0), exponent_ratio(q, q1)
    levels0, levels1 = [], []
    for j, a in enumerate(lam.levels):
        x = np.abs(a) * 2.0 ** (j * s)
        nz = x > 0
        yj = np.nan_to_num(y.levels[j], nan=1.0)
        if _is_inf(p):
            mj = float(x.max(initial=0.0))
        else:
            mj = float((x[nz] ** p * yj[nz]).sum()) ** (1 / p)
        e0 = np.zeros(x.shape)
        e1 = np.zeros(x.shape)
        if mj > 0:
            for out, sk, pk, prk, qrk, yk in ((e0, s0, p0, pr0, qr0, y0), (e1, s1, p1, pr1, qr1, y1)):
                val = 2.0 ** (-j * sk) * x[nz] ** prk * mj ** (qrk - prk)
                if not _is_inf(pk):
                    val = val * (yj[nz] / np.nan_to_num(yk.levels[j], nan=1.0)[nz]) ** (1 / pk)
                out[nz] = val
        levels0.append(e0)
        levels1.append(e1)
    lam0 = Sequence(lam.window, tuple(levels0))
    lam1 = Sequence(lam.window, tuple(levels1))
    return _assemble(lam, lam0, lam1, t, P0, P1, P, branch=_branch(P0, P1))


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class VerificationReport:
    reconstruction_ok: bool
    holder_ok: bool
    achieved_constant: float
    recon_err: float

    @property
    def ok(self) -> bool:
        return self.reconstruction_ok and self.holder_ok


def verify_factorization(F: Factorization, tol: float = 1e-9) -> VerificationReport:
    """Recompute reconstruction error and the Hölder lower bound from scratch."""
    err = _recon_err(F.lam, F.lam0, F.lam1, F.theta)
    n0, n1, nt = norm(F.lam0, F.P0), norm(F.lam1, F.P1), norm(F.lam, F.P)
    c = _ratio(n0, n1, F.theta, nt)
    return VerificationReport(err <= tol, bool(c >= 1 - tol), c, err)
