"""Integration of weights of the form  c |x|^a |x_1|^b exp(r |x|)  over boxes.

One-dimensional integrals use closed forms where available and
``scipy.integrate.quad`` otherwise (every dyadic cell has 0 as an endpoint
at worst, never in its interior).  In higher dimensions an adaptive
tensor Gauss-Legendre rule with dyadic bisection is used.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DivergentIntegralError

_GL_ORDER = 6
_MAX_DEPTH = 48


def half_line(t0: float, t1: float, beta: float, rate: float) -> float:
    """Integral of ``t^beta exp(rate t)`` over ``[t0, t1]`` with ``0 <= t0 <= t1``."""
    if t1 <= t0:
        return 0.0
    if t0 == 0.0 and beta <= -1.0:
        raise DivergentIntegralError(f"|x|^{beta:g} is not integrable at 0")
    if rate == 0.0:
        if beta == -1.0:
            return math.log(t1 / t0)
        e = beta + 1.0
        return (t1**e - t0**e) / e
    if beta == 0.0:
        try:
            return math.exp(rate * t0) * math.expm1(rate * (t1 - t0)) / rate
        except OverflowError:
            return math.inf
    # factor out the largest exponential to keep the integrand O(1)
    tref = t1 if rate > 0 else t0
    val, _ = integrate.quad(
        lambda t: t**beta * math.exp(rate * (t - tref)),
        t0, t1, epsabs=0.0, epsrel=1e-13, limit=400,
    )
    try:
        return val * math.exp(rate * tref)
    except OverflowError:
        return math.inf


def interval(lo: float, hi: float, beta: float, rate: float) -> float:
    """Integral of ``|x|^beta exp(rate |x|)`` over ``[lo, hi]``."""
    total = 0.0
    if lo < 0.0:
        total += half_line(max(0.0, -hi), -lo, beta, rate)
    if hi > 0.0:
        total += half_line(max(0.0, lo), hi, beta, rate)
    return total


@lru_cache(maxsize=None)
def _gl_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _gl_boxes(f, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Tensor Gauss-Legendre estimate for a batch of boxes ``(n, d)``."""
    x, w = _gl_nodes(_GL_ORDER)
    n, d = lo.shape
    grids = np.meshgrid(*([x] * d), indexing="ij")
    unit = np.stack([g.ravel() for g in grids], axis=-1)  # (m, d)
    wts = np.ones(len(unit))
    for g in np.meshgrid(*([w] * d), indexing="ij"):
        wts = wts * g.ravel()
    h = hi - lo
    pts = lo[:, None, :] + unit[None, :, :] * h[:, None, :]
    vals = f(pts)
    return (vals * wts).sum(axis=1) * np.prod(h, axis=1)


def _children(lo: np.ndarray, hi: np.ndarray):
    d = lo.shape[-1]
    mid = (lo + hi) / 2.0
    los, his = [], []
    for corner in range(2**d):
        bits = [(corner >> i) & 1 for i in range(d)]
        clo = np.where(bits, mid, lo)
        chi = np.where(bits, hi, mid)
        los.append(clo)
        his.append(chi)
    return np.array(los), np.array(his)


def adaptive_boxes(f, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Adaptive integral of ``f`` over a batch of boxes, relative tolerance ``tol``."""
    lo = np.atleast_2d(np.asarray(lo, float))
    hi = np.atleast_2d(np.asarray(hi, float))
    n, d = lo.shape
    coarse = _gl_boxes(f, lo, hi)
    clo, chi = _children(lo, hi)  # (2^d, n, d)
    parts = _gl_boxes(f, clo.reshape(-1, d), chi.reshape(-1, d)).reshape(2**d, n)
    fine = parts.sum(axis=0)
    out = fine.copy()
    bad = np.flatnonzero(np.abs(fine - coarse) > tol * np.abs(fine))
    for i in bad:
        out[i] = sum(_adapt_one(f, clo[c, i], chi[c, i], parts[c, i], tol, 1)
                     for c in range(2**d))
    return out


def _adapt_one(f, lo, hi, coarse, tol, depth):
    clo, chi = _children(lo, hi)
    parts = _gl_boxes(f, clo, chi)
    fine = parts.sum()
    if abs(fine - coarse) <= tol * abs(fine) or depth >= _MAX_DEPTH or fine == 0.0:
        return fine
    return sum(_adapt_one(f, clo[c], chi[c], parts[c], tol, depth + 1)
               for c in range(len(clo)))
