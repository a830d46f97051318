"""Boundary phenomena: the gap sequence, embedding chains and gap reports.

The gap sequence lies in ``b^{s0}_{p0,inf} & b^{s1}_{p1,inf}`` but not in the
closure of the finitely supported sequences of ``b^s_{p,inf}``: on every level
its ``b^s_{p,inf}`` size is one, so no cutoff ever gets close.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import islice, product
from numbers import Rational

from .dyadic import DyadicIndex, Window
from .errors import ParameterError, WindowError
from .sequences import (
    Sequence,
    SpaceParams,
    b_norm,
    cutoff,
    f_norm,
    interpolate_exponent,
)
from .weights import Constant, Weight

__all__ = [
    "GapSpec",
    "gap_cardinality",
    "gap_value",
    "gap_sequence",
    "EmbeddingCheck",
    "embedding_chain_check",
    "gap_report",
]

_MAX_DENOM = 10**4


def _is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


def _exact(x) -> Fraction:
    if isinstance(x, Rational):
        return Fraction(x)
    return Fraction(str(x))


def _inv(p) -> Fraction:
    return Fraction(0) if _is_inf(p) else 1 / _exact(p)


@dataclass(frozen=True)
class GapSpec:
    d: int
    s0: float
    s1: float
    p0: float
    p1: float
    theta: float = 0.5

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError("dimension must be >= 1")
        if _is_inf(self.p0) or not 1 <= self.p0 < self.p1:
            raise ParameterError("need 1 <= p0 < p1 <= inf")
        if not 0 < self.theta < 1:
            raise ParameterError("theta must lie in (0, 1)")
        lhs = _exact(self.s0) - self.d * _inv(self.p0)
        rhs = _exact(self.s1) - self.d * _inv(self.p1)
        if lhs > rhs:
            raise ParameterError("need s0 - d/p0 <= s1 - d/p1 for the gap regime")

    def interpolated(self) -> tuple:
        """``(s, p)`` of the intermediate space."""
        s = (1 - self.theta) * self.s0 + self.theta * self.s1
        p = interpolate_exponent(self.p0, self.p1, self.theta)
        return s, p

    def cardinality_exponent(self) -> Fraction:
        """``e`` with ``#K_j = ceil(2^{j e})``."""
        ds = _exact(self.s1) - _exact(self.s0)
        return -(ds / (_inv(self.p1) - _inv(self.p0)) - self.d)

    def value_exponent(self) -> Fraction:
        """``e`` with ``lambda_{j,k} = 2^{j e}`` on ``K_j``."""
        if _is_inf(self.p1):
            return -_exact(self.s1)
        p0, p1 = _exact(self.p0), _exact(self.p1)
        return (p1 * _exact(self.s1) - p0 * _exact(self.s0)) / (p0 - p1)


def _ceil_pow2(e: Fraction) -> int:
    """``ceil(2^e)`` in integer arithmetic."""
    if e <= 0:
        return 1
    a, b = e.numerator, e.denominator
    if b == 1:
        return 2**a
    n = math.ceil(2.0 ** float(e))
    if b > _MAX_DENOM:
        return n
    while n > 1 and (n - 1) ** b >= 2**a:
        n -= 1
    while n**b < 2**a:
        n += 1
    return n


def gap_cardinality(spec: GapSpec, j: int) -> int:
    return _ceil_pow2(j * spec.cardinality_exponent())


def gap_value(spec: GapSpec, j: int) -> float:
    return 2.0 ** float(j * spec.value_exponent())


def gap_sequence(spec: GapSpec, window: Window) -> Sequence:
    """Value ``2^{j e}`` on the first ``#K_j`` positions of the nonnegative orthant."""
    if window.d != spec.d:
        raise WindowError("window dimension does not match the gap parameters")
    lam = Sequence.zeros(window)
    for j in range(window.j_max + 1):
        n = gap_cardinality(spec, j)
        off = window.offset(j)
        if n > off**spec.d:
            raise WindowError(f"level {j} needs {n} positions, window has {off**spec.d}")
        val = gap_value(spec, j)
        for k in islice(product(range(off), repeat=spec.d), n):
            lam.levels[j][tuple(i + off for i in k)] = val
    return lam


@dataclass(frozen=True)
class EmbeddingCheck:
    c01: float
    c12: float


def embedding_chain_check(lam: Sequence, s0, p0, s1, p1, theta,
                          w: Weight | None = None) -> EmbeddingCheck | None:
    """Ratios along ``f^{s0}_{p0,inf} -> f^s_{p,1} -> f^{s1}_{p1,inf}``.

    Returns ``None`` for the zero sequence.
    """
    w = Constant() if w is None else w
    d = lam.window.d
    if _is_inf(p0) or _is_inf(p1):
        raise ParameterError("f-type spaces need finite p")
    if p0 == p1:
        if not s0 > s1:
            raise ParameterError("with p0 = p1 the chain needs s0 > s1")
    elif p0 < p1:
        if _exact(s0) - d * _inv(p0) < _exact(s1) - d * _inv(p1):
            raise ParameterError("need s0 - d/p0 >= s1 - d/p1")
    else:
        raise ParameterError("need p0 <= p1")
    if lam.nnz == 0:
        return None
    s = (1 - theta) * s0 + theta * s1
    p = interpolate_exponent(p0, p1, theta)
    n0 = f_norm(lam, SpaceParams(s0, p0, math.inf, "F", w))
    nm = f_norm(lam, SpaceParams(float(s), float(p), 1.0, "F", w))
    n1 = f_norm(lam, SpaceParams(s1, p1, math.inf, "F", w))
    return EmbeddingCheck(nm / n0, n1 / nm)


def gap_report(spec: GapSpec, window: Window, M_list=None, lam: Sequence | None = None,
               threshold: float = 0.9) -> list[dict]:
    """One record per checked claim, ending with a conclusion record.

    ``lam`` replaces the gap sequence (used as a negative control).
    """
    if lam is None:
        lam = gap_sequence(spec, window)
    if M_list is None:
        M_list = range(window.j_max)
    s, p = spec.interpolated()
    spaces = {
        "norm_target": SpaceParams(float(s), float(p) if not _is_inf(p) else p, math.inf, "B"),
        "norm0": SpaceParams(spec.s0, spec.p0, math.inf, "B"),
        "norm1": SpaceParams(spec.s1, spec.p1, math.inf, "B"),
    }
    echo = {"d": spec.d, "s0": spec.s0, "s1": spec.s1, "p0": spec.p0, "p1": spec.p1,
            "theta": spec.theta, "J": window.j_max, "K": window.half_extent}
    records = []
    finite = True
    for name, P in spaces.items():
        v = b_norm(lam, P)
        ok = math.isfinite(v) and v > 0
        finite &= ok
        records.append({"claim": name, "value": v, "pass": ok, "params": echo})
    gap = True
    for M in M_list:
        v = b_norm(lam - cutoff(lam, M), spaces["norm_target"])
        ok = v >= threshold
        gap &= ok
        records.append({"claim": "tail", "M": M, "value": v, "pass": ok, "params": echo})
    witnessed = finite and gap
    records.append({"claim": "conclusion",
                    "value": "strict inclusion witnessed" if witnessed else "no gap witnessed",
                    "pass": witnessed, "params": echo})
    return records
