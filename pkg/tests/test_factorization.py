import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calderon.dyadic import Window
from calderon.errors import DegenerateFactorizationError, ParameterError
from calderon.factorization import (
    Factorization,
    b_factorize,
    build_level_sets,
    f_exponents,
    f_factorize,
    holder_product_bound,
    lp_factorize,
    target_params,
    verify_factorization,
)
from calderon.instances import InstanceShape, generate_instances, instance_rng, random_sequence
from calderon.maximal import CellFunction
from calderon.sequences import Sequence, SpaceParams, YTable, norm
from calderon.weights import Constant, Exponential, Power, combine, finest_masses

INF = math.inf
SHAPE = InstanceShape(1, 4, 2, nnz=12)


def test_holder_equality_on_the_diagonal():
    P = SpaceParams(0.5, 2, 3, "F", Power(0.4))
    for lam in generate_instances(1, 3, SHAPE):
        chk = holder_product_bound(lam, lam, 0.3, P, P)
        assert chk.ok
        assert chk.lhs_norm == pytest.approx(chk.rhs, rel=1e-12)


def test_holder_random_pairs():
    P0 = SpaceParams(0.0, 1, 4, "F", Power(0.5))
    P1 = SpaceParams(1.0, 2, 2, "F", Power(-0.3))
    for seed in range(100):
        lam0, lam1 = (random_sequence(instance_rng(seed, i), SHAPE) for i in range(2))
        assert holder_product_bound(lam0, lam1, 0.5, P0, P1).ok


def test_holder_disjoint_supports():
    win = SHAPE.window
    lam0 = Sequence.from_entries(win, {(0, (0,)): 1.0})
    lam1 = Sequence.from_entries(win, {(1, (0,)): 1.0})
    chk = holder_product_bound(lam0, lam1, 0.5, SpaceParams(0, 2, 2, "B"), SpaceParams(0, 1, 1, "B"))
    assert chk.lhs_norm == 0.0 and chk.ok
    with pytest.raises(ParameterError):
        holder_product_bound(lam0, lam1, 0.5, SpaceParams(0, 2, 2, "B"), SpaceParams(0, 1, 1, "F"))


def test_lp_single_cell():
    win = Window(1, 0, 1)
    f = CellFunction(win, np.array([0.0, 2.0]))
    lp = lp_factorize(f, Constant(), Constant(), 0.5, 1, 2)
    assert lp.f0.values[1] == pytest.approx(2 ** (4 / 3), rel=1e-14)
    assert lp.f1.values[1] == pytest.approx(2 ** (2 / 3), rel=1e-14)
    assert lp.norm_target == pytest.approx(2.0, rel=1e-14)
    assert lp.achieved_constant == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("p0,p1", [(1, 2), (0.5, 4), (2, INF), (INF, 1.5), (INF, INF)])
def test_lp_factorization_identities(p0, p1):
    rng = np.random.default_rng(4)
    win = Window(1, 5, 2)
    f = CellFunction(win, 2.0 ** rng.uniform(-6, 6, win.finest_shape))
    lp = lp_factorize(f, Power(0.5), Exponential(-1.0), 0.3, p0, p1)
    assert lp.recon_err <= 1e-13
    assert lp.achieved_constant == pytest.approx(1.0, rel=1e-10)
    if p1 == INF and p0 != INF:
        np.testing.assert_array_equal(lp.f1.values, 1.0)
    if p0 == p1 == INF:
        np.testing.assert_array_equal(lp.f0.values, f.values)


def test_lp_unweighted_exponents():
    rng = np.random.default_rng(0)
    win = Window(1, 3, 1)
    f = CellFunction(win, rng.uniform(0, 3, win.finest_shape))
    lp = lp_factorize(f, Constant(), Constant(), 0.5, 1, 2)
    np.testing.assert_allclose(lp.f0.values, f.values ** (4 / 3), rtol=1e-14)
    np.testing.assert_allclose(lp.f1.values, f.values ** (2 / 3), rtol=1e-14)


def test_f_exponents_example():
    P0 = SpaceParams(Fraction(0), Fraction(1), Fraction(4))
    P1 = SpaceParams(Fraction(1), Fraction(2), Fraction(2))
    ex = f_exponents(P0, P1, Fraction(1, 2))
    assert (ex.s, ex.p, ex.q) == pytest.approx((0.5, 4 / 3, 8 / 3))
    assert ex.gamma == pytest.approx(2 / 3) and ex.delta == pytest.approx(-2 / 3)
    assert ex.u == pytest.approx(1 / 3) and ex.v == pytest.approx(-1 / 3)
    assert ex.u + 0 == pytest.approx(ex.s * ex.qr0)
    assert ex.v + 1 == pytest.approx(ex.s * ex.qr1)


exps = st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(4, 3), Fraction(2), Fraction(4)])
thetas = st.fractions(Fraction(1, 100), Fraction(99, 100))


@settings(max_examples=100, deadline=None)
@given(exps, exps, exps, exps, st.integers(-3, 3), st.integers(-3, 3), thetas)
def test_exponent_cancellation(p0, p1, q0, q1, s0, s1, t):
    ex = f_exponents(SpaceParams(s0, p0, q0), SpaceParams(s1, p1, q1), t)
    t = float(t)
    assert (1 - t) * ex.gamma + t * ex.delta == pytest.approx(0, abs=1e-12)
    assert (1 - t) * ex.u + t * ex.v == pytest.approx(0, abs=1e-12)


def test_level_set_example():
    win = Window(1, 3, 1)
    lam = Sequence.from_entries(win, {(0, (0,)): 1.0})
    P = SpaceParams(0, 2, 2)
    ls = build_level_sets(lam, P, Constant(), 1.0)
    assert (ls.l_min, ls.l_max) == (-1, 0)
    inside = np.zeros(win.finest_shape, bool)
    inside[win.offset(win.j_max):] = True
    np.testing.assert_array_equal(ls.A(-1), inside)
    assert not ls.A(0).any()
    assert ls.class_of((0, (0,))) == -1
    assert ls.class_of((0, (-1,))) is None
    assert ls.uncaptured(lam) == []


def test_level_sets_of_zero_are_empty():
    win = Window(1, 2, 1)
    ls = build_level_sets(Sequence.zeros(win), SpaceParams(0, 2, 2), Constant(), 1.0)
    assert ls.empty and list(ls.levels()) == []


def brute_force_classes(ls, win):
    """Measure test for every cube and every level, straight from the definition."""
    J = win.j_max
    out = {}
    for ell in ls.levels():
        A0, A1 = ls.A(ell), ls.A(ell + 1)
        for idx in win.indices():
            r = 2 ** (J - idx.j)
            pos = win.position(idx)
            sl = tuple(slice(p * r, (p + 1) * r) for p in pos)
            n = r**win.d
            if A0[sl].sum() > n / 2 and A1[sl].sum() <= n / 2:
                assert idx not in out, "classes must be disjoint"
                out[idx] = ell
    return out


@pytest.mark.parametrize("d,J,K", [(1, 5, 2), (2, 3, 1)])
def test_level_sets_match_measure_definition(d, J, K):
    win = Window(d, J, K)
    P = SpaceParams(0.3, 1.5, 2.0, "F", Power(0.5))
    for lam in generate_instances(8, 4, InstanceShape(d, J, K, nnz=15)):
        ls = build_level_sets(lam, P, Exponential(0.5), 0.7)
        brute = brute_force_classes(ls, win)
        for idx in win.indices():
            assert ls.class_of(idx) == brute.get(idx)
        for ell in ls.levels():
            assert not (ls.A(ell + 1) & ~ls.A(ell)).any()
            assert all(ls.class_of(i) == ell for i in ls.C(ell))
        # every support index lands in exactly one class
        assert ls.uncaptured(lam) == []


FINITE = (SpaceParams(0.0, 1, 4, "F", Power(0.5)), SpaceParams(1.0, 2, 2, "F", Power(-0.3)))


def test_f_factorize_reconstructs():
    P0, P1 = FINITE
    for lam in generate_instances(2, 10, SHAPE):
        F = f_factorize(lam, P0, P1, 0.5)
        assert F.status == "ok" and F.uncaptured == 0 and not F.swapped
        assert F.recon_err <= 1e-12
        assert F.achieved_constant >= 1 - 1e-12
        rep = verify_factorization(F)
        assert rep.ok and rep.achieved_constant == pytest.approx(F.achieved_constant)


def test_f_factorize_swaps_for_negative_gamma():
    P0, P1 = FINITE
    lam = generate_instances(3, 1, SHAPE)[0]
    # gamma at theta=0.5 for (P1, P0) is negative
    F = f_factorize(lam, P1, P0, 0.5)
    assert F.swapped
    assert F.P0 is P1 and F.P1 is P0
    assert F.norm0 == pytest.approx(norm(F.lam0, P1))
    assert F.recon_err <= 1e-12
    G = f_factorize(lam, P0, P1, 0.5)
    assert F.achieved_constant == pytest.approx(G.achieved_constant, rel=1e-12)


def test_f_factorize_on_the_diagonal():
    P = SpaceParams(0.5, 2, 3, "F", Power(0.3))
    for lam in generate_instances(5, 20, SHAPE):
        F = f_factorize(lam, P, P, 0.4)
        assert F.status == "degenerate"
        assert F.lam0.allclose(lam.abs()) and F.lam1.allclose(lam.abs())
        assert F.achieved_constant == pytest.approx(1.0, rel=0.1)


@pytest.mark.parametrize("q0,q1", [(INF, INF), (INF, 2.0), (2.0, INF)])
def test_f_factorize_infinite_q(q0, q1):
    P0 = SpaceParams(0.0, 1, q0)
    P1 = SpaceParams(0.5, 2, q1)
    for lam in generate_instances(6, 10, SHAPE):
        F = f_factorize(lam, P0, P1, 0.5)
        assert F.branch == {(INF, INF): "q0=q1=inf", (INF, 2.0): "q1<q0=inf",
                            (2.0, INF): "q0<q1=inf"}[(q0, q1)]
        assert F.recon_err <= 1e-12
        assert F.uncaptured == 0
        for a, b in zip(F.lam0.levels, lam.levels):
            assert not np.any((a != 0) & (b == 0))


def test_degenerate_gamma_with_distinct_weights():
    P0 = SpaceParams(0.0, 2, 2, "F", Power(0.5))
    P1 = SpaceParams(1.0, 4, 4, "F", Constant())
    small = generate_instances(0, 1, InstanceShape(1, 3, 1, nnz=4))[0]
    F = f_factorize(small, P0, P1, 0.5)
    assert F.status == "degenerate-singular"
    assert F.recon_err <= 1e-12
    with pytest.raises(DegenerateFactorizationError):
        f_factorize(generate_instances(0, 1, SHAPE)[0], P0, P1, 0.5)


def test_degenerate_gamma_with_equal_weights_is_pointwise():
    P0 = SpaceParams(0.0, 2, 2, "F", Power(0.5))
    P1 = SpaceParams(1.0, 4, 4, "F", Power(0.5))
    lam = generate_instances(0, 1, SHAPE)[0]
    F = f_factorize(lam, P0, P1, 0.5)
    assert F.status == "degenerate"
    assert F.recon_err <= 1e-13


def test_f_factorize_rejects_bad_input():
    lam = generate_instances(0, 1, SHAPE)[0]
    with pytest.raises(ParameterError):
        f_factorize(lam, SpaceParams(0, 2, 2, "B"), SpaceParams(0, 1, 1, "B"), 0.5)
    with pytest.raises(ParameterError):
        f_factorize(lam, *FINITE, 1.5)


def test_b_factorize_trivial_case():
    win = SHAPE.window
    y = YTable.volumes(win)
    lam = generate_instances(1, 1, SHAPE)[0]
    F = b_factorize(lam, 0.5, 2, 3, 0.5, 2, 3, 0.3, y, y)
    assert F.lam0.allclose(lam.abs()) and F.lam1.allclose(lam.abs())
    assert F.achieved_constant == pytest.approx(1.0, rel=1e-12)


def test_b_factorize_single_entry():
    win = SHAPE.window
    y0 = YTable.from_weight(Power(0.5), win)
    y1 = YTable.from_weight(Exponential(1.0), win)
    idx = (2, (1,))
    v = 3.0
    lam = Sequence.from_entries(win, {idx: v})
    t, s0, p0, q0, s1, p1, q1 = 0.5, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0
    F = b_factorize(lam, s0, p0, q0, s1, p1, q1, t, y0, y1)
    # one term: each endpoint norm is 2^{j s_i} |lambda_i| y_i^{1/p_i}
    y0v, y1v = y0.levels[2][win.position(idx)], y1.levels[2][win.position(idx)]
    n0 = 2 ** (2 * s0) * F.lam0[idx] * y0v ** (1 / p0)
    n1 = 2 ** (2 * s1) * F.lam1[idx] * y1v ** (1 / p1)
    assert F.norm0 == pytest.approx(n0, rel=1e-13)
    assert F.norm1 == pytest.approx(n1, rel=1e-13)
    assert F.lam0[idx] ** (1 - t) * F.lam1[idx] ** t == pytest.approx(v, rel=1e-13)
    assert F.achieved_constant == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p0,q0,p1,q1", [(1, 1, 2, 2), (0.5, 4, 4, 0.5), (1, INF, 2, 2), (INF, 2, 2, INF)])
def test_b_factorize_is_exact(p0, q0, p1, q1):
    win = SHAPE.window
    y0 = YTable.from_weight(Power(0.5), win)
    y1 = YTable.from_weight(Exponential(-1.0), win)
    for lam in generate_instances(9, 10, SHAPE):
        F = b_factorize(lam, 0.0, p0, q0, 1.0, p1, q1, 0.5, y0, y1)
        assert F.recon_err <= 1e-12
        assert F.achieved_constant == pytest.approx(1.0, abs=1e-9)
        assert verify_factorization(F).ok


def test_b_factorize_zero_level():
    win = SHAPE.window
    y = YTable.volumes(win)
    F = b_factorize(Sequence.zeros(win), 0, 1, 1, 1, 2, 2, 0.5, y, y)
    assert F.norm_target == 0 and F.achieved_constant == 1.0


def test_verify_factorization_negative_control():
    win = SHAPE.window
    y = YTable.from_weight(Power(0.5), win)
    lam = generate_instances(2, 1, SHAPE)[0]
    F = b_factorize(lam, 0, 1, 1, 1, 2, 2, 0.5, y, y)
    bad = F.lam0.map_levels(lambda j, a: a * 1.01 if j == lam.support()[0].j else a)
    G = Factorization(lam, bad, F.lam1, F.theta, F.P0, F.P1, F.P, F.norm0, F.norm1,
                      F.norm_target, F.achieved_constant, F.recon_err)
    rep = verify_factorization(G)
    assert not rep.reconstruction_ok and not rep.ok
    assert rep.recon_err > 1e-3


def test_record_fields():
    lam = generate_instances(2, 1, SHAPE)[0]
    rec = f_factorize(lam, *FINITE, 0.5).to_record()
    for key in ("theta", "p0", "q0", "s0", "p1", "q1", "s1", "norm0", "norm1",
                "norm_target", "achieved_constant", "recon_err"):
        assert key in rec
    y = YTable.volumes(SHAPE.window)
    rec = b_factorize(lam, 0, INF, 1, 1, 2, INF, 0.5, y, y).to_record()
    assert rec["p0"] == "inf" and rec["scale"] == "B"


def test_target_params_combines_weights():
    P = target_params(*FINITE, 0.5)
    m = finest_masses(P.weight, SHAPE.window)
    ref = finest_masses(combine(Power(0.5), Power(-0.3), 0.5, 1, 2), SHAPE.window)
    np.testing.assert_allclose(m, ref, rtol=1e-12)
    with pytest.raises(ParameterError):
        target_params(SpaceParams(0, 2, 2, "F"), SpaceParams(0, 2, 2, "B"), 0.5)
