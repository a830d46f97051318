"""Acceptance suite: ten batch checks with full and quick sizes.

Each check returns a :class:`CriterionResult` holding one report record per
assertion plus summary metrics.  All randomness flows from the suite seed
through :func:`calderon.instances.instance_rng`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .counterexamples import GapSpec, gap_report, gap_sequence
from .dyadic import Window
from .factorization import (
    b_factorize,
    f_exponents,
    f_factorize,
    holder_product_bound,
    lp_factorize,
)
from .instances import InstanceShape, instance_rng, random_cell_function, random_cell_measure, random_sequence
from .maximal import CellFunction, vv_maximal_constant
from .oracle import oracle_calderon_norm
from .sequences import (
    Sequence,
    SpaceParams,
    YTable,
    b_norm,
    b_norm_y,
    cutoff,
    f_norm,
    lift_seq,
    norm,
)
from .weights import CellMeasure, Constant, Exponential, Power, ap_constant, level_masses, w_class_ratio

__all__ = ["CriterionResult", "CRITERIA", "run_suite", "F_SCENARIOS"]

INF = math.inf
EXPONENTS = (0.5, 1.0, 4 / 3, 2.0, 4.0, INF)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool = True
    metrics: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    seconds: float = 0.0

    def check(self, metric: str, value, ok: bool, instance: int | None = None, **params) -> bool:
        self.records.append({"experiment": f"criterion{self.number}", "instance": instance,
                             "metric": metric, "value": _jsonable(value), "pass": bool(ok),
                             "params": {k: _jsonable(v) for k, v in params.items()}})
        if not ok:
            self.passed = False
        return ok

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{status}] criterion {self.number}: {self.name} ({parts}; {self.seconds:.1f}s)"


def _jsonable(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return str(v)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def _spread(values) -> float:
    """``max/min - 1`` of positive numbers: the relative change between them."""
    values = list(values)
    return max(values) / min(values) - 1.0


def _weight_pool(window: Window, seed: int) -> list:
    rng = instance_rng(seed, 10**6)
    return [Constant(), Power(0.5), Power(-0.5), Power(1.5), Exponential(1.0),
            Exponential(-0.5), random_cell_measure(rng, window), random_cell_measure(rng, window)]


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _paired(rng, shape: InstanceShape) -> tuple[Sequence, Sequence]:
    """Two sequences on a common random support with independent magnitudes."""
    lam0 = random_sequence(rng, shape)
    mags = 2.0 ** rng.uniform(-8, 8, lam0.nnz)
    it = iter(mags)
    lam1 = lam0.map_levels(lambda j, a: np.where(a != 0, 1.0, 0.0))
    for a in lam1.levels:
        nz = np.nonzero(a)
        a[nz] = [next(it) for _ in range(len(nz[0]))]
    return lam0, lam1


def _random_y(rng, window: Window) -> YTable:
    return YTable(window, tuple(window.cell_volume(j) * 2.0 ** rng.uniform(-3, 3, window.level_shape(j))
                                for j in range(window.j_max + 1)))


# --------------------------------------------------------------------------


def criterion_1(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(1, "Hölder direction with constant 1")
    n = 100 if quick else 500
    shape = InstanceShape(1, 6, 2, nnz=30)
    win = shape.window
    pool = _weight_pool(win, seed)
    worst = -INF
    for i in range(n):
        rng = instance_rng(seed, 100_000 + i)
        scale = "F" if i % 2 == 0 else "B"
        exps = EXPONENTS if scale == "B" else EXPONENTS[:-1]
        ps = [_pick(rng, exps), _pick(rng, exps)]
        qs = [_pick(rng, EXPONENTS), _pick(rng, EXPONENTS)]
        ss = rng.uniform(-1, 1, 2)
        theta = float(rng.uniform(0.05, 0.95))
        if scale == "B" and i % 4 == 1:
            w = [_random_y(rng, win), _random_y(rng, win)]
        else:
            w = [_pick(rng, pool), _pick(rng, pool)]
        P0 = SpaceParams(float(ss[0]), ps[0], qs[0], scale, w[0])
        P1 = SpaceParams(float(ss[1]), ps[1], qs[1], scale, w[1])
        lam0, lam1 = _paired(rng, shape)
        hc = holder_product_bound(lam0, lam1, theta, P0, P1)
        excess = hc.lhs_norm / hc.rhs - 1 if hc.rhs else 0.0
        worst = max(worst, excess)
        res.check("holder_excess", excess, excess <= 1e-10, i, scale=scale, p0=ps[0], p1=ps[1],
                  q0=qs[0], q1=qs[1], theta=theta)
    res.metrics.update(instances=n, worst_excess=worst)
    return res


def criterion_2(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(2, "L_p factorization exactness")
    n = 40 if quick else 200
    win = Window(1, 6, 2)
    pool = _weight_pool(win, seed)
    finite = EXPONENTS[:-1]
    worst = 0.0
    for i in range(n):
        rng = instance_rng(seed, 200_000 + i)
        kind = i % 5
        p0 = INF if kind in (1, 2) else _pick(rng, finite)
        p1 = INF if kind in (0, 1) else _pick(rng, finite)
        theta = float(rng.uniform(0.05, 0.95))
        vals = 2.0 ** rng.uniform(-8, 8, win.finest_shape)
        vals[rng.random(win.finest_shape) < 0.2] = 0.0
        f = CellFunction(win, vals)
        w0, w1 = _pick(rng, pool), _pick(rng, pool)
        L = lp_factorize(f, w0, w1, theta, p0, p1)
        err = abs(L.achieved_constant - 1)
        worst = max(worst, err)
        ok = err <= 1e-10 and L.recon_err <= 1e-12
        if p1 == INF and p0 != INF:
            ok = ok and bool(np.all(L.f1.values == 1.0))
        res.check("norm_identity_err", err, ok, i, p0=p0, p1=p1, theta=theta, recon_err=L.recon_err)
    res.metrics.update(instances=n, worst_rel_err=worst)
    return res


def _b_draw(rng, i: int):
    ss = rng.uniform(-1, 1, 2)
    p = [_pick(rng, EXPONENTS), _pick(rng, EXPONENTS)]
    q = [_pick(rng, EXPONENTS), _pick(rng, EXPONENTS)]
    kind = i % 4
    if kind == 0:
        q[0] = INF
    elif kind == 1:
        p = [INF, INF]
    elif kind == 2:
        q = [INF, INF]
    return float(ss[0]), p[0], q[0], float(ss[1]), p[1], q[1], float(rng.uniform(0.05, 0.95))


def criterion_3(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(3, "b-factorization optimality")
    n = 40 if quick else 200
    n_oracle = 5 if quick else 20
    win = Window(1, 6, 2)
    pool = _weight_pool(win, seed)
    worst = 0.0
    for i in range(n):
        rng = instance_rng(seed, 300_000 + i)
        s0, p0, q0, s1, p1, q1, theta = _b_draw(rng, i)
        if i % 2:
            y0, y1 = _random_y(rng, win), _random_y(rng, win)
        else:
            y0 = YTable.from_weight(_pick(rng, pool), win)
            y1 = YTable.from_weight(_pick(rng, pool), win)
        lam = random_sequence(rng, InstanceShape(1, 6, 2, nnz=25))
        F = b_factorize(lam, s0, p0, q0, s1, p1, q1, theta, y0, y1)
        err = abs(F.achieved_constant - 1)
        worst = max(worst, err)
        res.check("achieved_constant_err", err, err <= 1e-9 and F.recon_err <= 1e-12, i,
                  s0=s0, p0=p0, q0=q0, s1=s1, p1=p1, q1=q1, theta=theta, recon_err=F.recon_err)
    worst_oracle = 0.0
    for i in range(n_oracle):
        rng = instance_rng(seed, 350_000 + i)
        s0, p0, q0, s1, p1, q1, theta = _b_draw(rng, i)
        y0, y1 = _random_y(rng, win), _random_y(rng, win)
        lam = random_sequence(rng, InstanceShape(1, 6, 2, nnz=1 + i % 6))
        F = b_factorize(lam, s0, p0, q0, s1, p1, q1, theta, y0, y1)
        O = oracle_calderon_norm(lam, F.P0, F.P1, theta, seed=seed + i)
        gap = abs(O.constant - F.achieved_constant)
        worst_oracle = max(worst_oracle, gap)
        res.check("oracle_gap", gap, gap <= 2e-6, i, s0=s0, p0=p0, q0=q0, s1=s1, p1=p1, q1=q1,
                  theta=theta, support=lam.nnz)
    res.metrics.update(instances=n, worst_err=worst, oracle_instances=n_oracle, worst_oracle_gap=worst_oracle)
    return res


# six fixed f-scale scenarios: (label, P0, P1, theta)
F_SCENARIOS = (
    ("finite, power weights", SpaceParams(0.0, 1.0, 4.0, "F", Power(0.5)),
     SpaceParams(1.0, 2.0, 2.0, "F", Power(-0.3)), 0.5),
    ("finite, exponential weight, p0 < 1", SpaceParams(0.5, 0.5, 1.0, "F", Exponential(0.5)),
     SpaceParams(-0.5, 2.0, 3.0, "F", Constant()), 0.3),
    ("finite, swapped roles", SpaceParams(0.0, 4.0, 1.0, "F", Constant()),
     SpaceParams(1.0, 1.0, 2.0, "F", Power(0.5)), 0.6),
    ("q1 < q0 = inf", SpaceParams(0.0, 2.0, INF, "F", Constant()),
     SpaceParams(0.5, 4.0, 2.0, "F", Power(0.3)), 0.5),
    ("q0 < q1 = inf", SpaceParams(0.0, 2.0, 2.0, "F", Power(0.5)),
     SpaceParams(0.5, 4.0, INF, "F", Constant()), 0.5),
    ("q0 = q1 = inf", SpaceParams(0.0, 1.0, INF, "F", Power(0.5)),
     SpaceParams(1.0, 2.0, INF, "F", Constant()), 0.4),
)


def _exponent_identity_error(P0, P1, theta) -> float:
    ex = f_exponents(P0, P1, theta)
    errs = [
        (1 - theta) * ex.gamma + theta * ex.delta,
        (1 - theta) * ex.u + theta * ex.v,
        ex.u + P0.s - ex.s * ex.qr0,
        ex.v + P1.s - ex.s * ex.qr1,
    ]
    scale = max(1.0, abs(ex.u), abs(ex.v), abs(ex.gamma), abs(ex.delta), abs(ex.s * ex.qr0), abs(ex.s * ex.qr1))
    return max(abs(e) for e in errs) / scale


def criterion_4(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(4, "f-factorization reconstruction, capture, exponents, stability")
    n_draws = 200 if quick else 1000
    batch = 30 if quick else 100
    worst_id = 0.0
    for i in range(n_draws):
        rng = instance_rng(seed, 400_000 + i)
        qs = [_pick(rng, (*EXPONENTS, float(rng.uniform(0.3, 10)))) for _ in range(2)]
        ps = rng.uniform(0.3, 10, 2)
        ss = rng.uniform(-3, 3, 2)
        theta = float(rng.uniform(0.01, 0.99))
        P0 = SpaceParams(float(ss[0]), float(ps[0]), qs[0])
        P1 = SpaceParams(float(ss[1]), float(ps[1]), qs[1])
        err = _exponent_identity_error(P0, P1, theta)
        worst_id = max(worst_id, err)
        res.check("exponent_identity_err", err, err <= 1e-12, i, theta=theta)
    worst_rec, missing, spreads = 0.0, 0, {}
    for si, (label, P0, P1, theta) in enumerate(F_SCENARIOS):
        maxima = []
        for J in (5, 6):
            shape = InstanceShape(1, J, 2, nnz=20)
            best = 0.0
            for i in range(batch):
                rng = instance_rng(seed, 410_000 + 1000 * si + i)
                lam = random_sequence(rng, shape)
                F = f_factorize(lam, P0, P1, theta)
                worst_rec = max(worst_rec, F.recon_err)
                missing += F.uncaptured
                res.check("recon_err", F.recon_err, F.recon_err <= 1e-12 and F.uncaptured == 0,
                          i, scenario=label, J=J, uncaptured=F.uncaptured)
                best = max(best, F.achieved_constant)
            maxima.append(best)
        spread = _spread(maxima)
        spreads[label] = spread
        res.check("batch_max_spread", spread, spread < 0.25, si, scenario=label,
                  max_J5=maxima[0], max_J6=maxima[1])
    res.metrics.update(draws=n_draws, worst_identity_err=worst_id, worst_recon_err=worst_rec,
                       uncaptured=missing, worst_spread=max(spreads.values()))
    return res


def criterion_5(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(5, "oracle sandwich")
    n = 10 if quick else 50
    lo_margin, hi_margin = INF, INF
    for i in range(n):
        label, P0, P1, theta = F_SCENARIOS[i % len(F_SCENARIOS)]
        rng = instance_rng(seed, 500_000 + i)
        lam = random_sequence(rng, InstanceShape(1, 6, 2, nnz=1 + (i // len(F_SCENARIOS)) % 6))
        F = f_factorize(lam, P0, P1, theta)
        O = oracle_calderon_norm(lam, P0, P1, theta, seed=seed + i)
        c = O.value / F.norm_target
        lo_margin = min(lo_margin, c - (1 - 1e-6))
        hi_margin = min(hi_margin, F.achieved_constant + 1e-6 - c)
        res.check("oracle_constant", c, 1 - 1e-6 <= c <= F.achieved_constant + 1e-6, i,
                  scenario=label, f_constant=F.achieved_constant, support=lam.nnz)
    res.metrics.update(instances=n, lower_margin=lo_margin, upper_margin=hi_margin)
    return res


def criterion_6(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(6, "Muckenhoupt boundaries")
    t0 = time.perf_counter()
    worst = 0.0
    for a in (-0.9, -0.5, 0.0, 0.5, 0.9):
        est = ap_constant(Power(a), 2.0, local=True)
        worst = max(worst, est.constant)
        res.check("local_A2", est.constant, est.constant < 1e3 and not est.diverging, alpha=a)
    for a in (-1.1, -1.5):
        est = ap_constant(Power(a), 2.0, local=True)
        res.check("local_A2_diverging", est.constant, est.diverging, alpha=a)
    glob = ap_constant(Exponential(1.0), 2.0, local=False)
    res.check("exp_global_diverging", glob.constant, glob.diverging, history=list(glob.history))
    loc = ap_constant(Exponential(1.0), 2.0, local=True)
    res.check("exp_local_bounded", loc.constant, loc.constant < 1e3 and not loc.diverging)
    elapsed = time.perf_counter() - t0
    res.check("runtime_s", elapsed, elapsed < 30.0)
    res.metrics.update(worst_bounded=worst, exp_local=loc.constant)
    return res


W_PAIRS = (
    (Power(0.5), Constant()),
    (Power(-0.5), Power(0.5)),
    (Exponential(1.0), Constant()),
    (Exponential(0.5), Power(0.3)),
    (Power(1.0), Exponential(-1.0)),
    (Power(0.9), Power(-0.9)),
)


def epsilon_pair(eps: float, window: Window | None = None) -> tuple[CellMeasure, CellMeasure]:
    """Densities alternating ``eps, 1/eps`` and the mirrored ``1/eps, eps``."""
    window = window or Window(1, 1, 1)
    vol = window.cell_volume(window.j_max)
    idx = np.indices(window.finest_shape).sum(axis=0) % 2
    a = np.where(idx == 0, eps, 1 / eps) * vol
    b = np.where(idx == 0, 1 / eps, eps) * vol
    return CellMeasure(window, a), CellMeasure(window, b)


def criterion_7(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(7, "weight-pair comparability")
    theta, p0, p1 = 0.5, 2.0, 4.0
    lows = []
    for pi, (w0, w1) in enumerate(W_PAIRS):
        lo5, hi5 = w_class_ratio(w0, w1, theta, p0, p1, Window(1, 5, 2))
        lo6, hi6 = w_class_ratio(w0, w1, theta, p0, p1, Window(1, 6, 2))
        lows.append(lo6)
        change = abs(lo6 - lo5) / lo5
        res.check("min_ratio", lo6, lo6 > 1e-3 and change < 0.25 and max(hi5, hi6) <= 1 + 1e-9, pi,
                  w0=repr(w0), w1=repr(w1), min_J5=lo5, change=change)
    c0, c1 = epsilon_pair(1e-4)
    lo, _ = w_class_ratio(c0, c1, theta, 2.0, 2.0, c0.window)
    res.check("epsilon_min_ratio", lo, lo < 1e-3, eps=1e-4)
    res.metrics.update(smallest_min_ratio=min(lows), epsilon_ratio=lo)
    return res


def criterion_8(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(8, "gap witness")
    J = 6 if quick else 8
    spec = GapSpec(1, 0.0, 0.0, 1.0, 2.0, 0.5)
    win = Window(1, J, 1)
    recs = gap_report(spec, win, range(J))
    for r in recs:
        if r["claim"] in ("norm_target", "norm0", "norm1", "tail"):
            res.check(r["claim"], r["value"], abs(r["value"] - 1.0) <= 1e-12, r.get("M"))
    res.check("conclusion", recs[-1]["value"], recs[-1]["value"] == "strict inclusion witnessed")
    finite = cutoff(gap_sequence(spec, win), 2)
    neg = gap_report(spec, win, range(J), lam=finite)
    tail = [r["value"] for r in neg if r["claim"] == "tail"]
    res.check("negative_control_tail", tail[-1], tail[-1] <= 1e-12 and neg[-1]["value"] == "no gap witnessed")
    res.metrics.update(J=J, max_dev=max(abs(r["value"] - 1) for r in recs if r["claim"] != "conclusion"))
    return res


def criterion_9(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(9, "vector-valued maximal inequality proxy")
    batch = 20 if quick else 100
    weights = (("1", Constant()), ("|x|^0.5", Power(0.5)), ("|x|^-0.5", Power(-0.5)))
    pqs = ((2.0, 2.0), (2.0, INF), (4.0, 2.0))
    windows = [Window(1, J, 2) for J in (4, 5, 6)]
    families = {}
    for win in windows:
        fams = []
        for i in range(batch):
            rng = instance_rng(seed, 900_000 + i)
            fams.append([random_cell_function(rng, win) for _ in range(4)])
        families[win] = fams
    worst_spread, smallest = 0.0, INF
    for wname, w in weights:
        for p, q in pqs:
            maxima = []
            for win in windows:
                vals = [vv_maximal_constant(fam, p, q, w) for fam in families[win]]
                smallest = min(smallest, min(vals))
                res.check("min_constant", min(vals), min(vals) >= 1 - 1e-12, weight=wname, p=p, q=q, J=win.j_max)
                maxima.append(max(vals))
            spread = _spread(maxima)
            worst_spread = max(worst_spread, spread)
            res.check("batch_max_spread", spread, spread < 0.25, weight=wname, p=p, q=q, maxima=maxima)
    res.metrics.update(families=batch, worst_spread=worst_spread, smallest=smallest)
    return res


def criterion_10(seed: int, quick: bool) -> CriterionResult:
    res = CriterionResult(10, "norm cross-identities")
    n = 40 if quick else 200
    shape = InstanceShape(1, 6, 2, nnz=30)
    win = shape.window
    pool = _weight_pool(win, seed)
    worst_fb = worst_lift = 0.0
    for i in range(n):
        rng = instance_rng(seed, 1_000_000 + i)
        lam = random_sequence(rng, shape)
        w = _pick(rng, pool)
        s = float(rng.uniform(-1, 1))
        p = _pick(rng, EXPONENTS[:-1])
        fn = f_norm(lam, SpaceParams(s, p, p, "F", w))
        bn = b_norm(lam, SpaceParams(s, p, p, "B", w))
        e = _rel(fn, bn)
        worst_fb = max(worst_fb, e)
        res.check("f_equals_b", e, e <= 1e-12, i, s=s, p=p)
        q = _pick(rng, EXPONENTS)
        pb = _pick(rng, EXPONENTS)
        PB = SpaceParams(s, pb, q, "B", w)
        y = YTable(win, level_masses(PB.weight, win))
        by = b_norm_y(lam, s, pb, q, y)
        res.check("b_y_equals_b", by, by == b_norm(lam, PB), i, s=s, p=pb, q=q)
        sigma = float(rng.uniform(-1, 1))
        for P in (SpaceParams(s, p, q, "F", w), PB):
            e = _rel(norm(lift_seq(lam, sigma), P), norm(lam, P.replace(s=s + sigma)))
            worst_lift = max(worst_lift, e)
            res.check("lift_identity", e, e <= 1e-12, i, scale=P.scale, sigma=sigma)
    res.metrics.update(instances=n, worst_f_b=worst_fb, worst_lift=worst_lift)
    return res


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def run_suite(seed: int = 7, quick: bool = False, only=None) -> list[CriterionResult]:
    out = []
    for number, fn in CRITERIA.items():
        if only and number not in only:
            continue
        t0 = time.perf_counter()
        res = fn(seed, quick)
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out
