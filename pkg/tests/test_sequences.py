import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calderon.dyadic import Window
from calderon.errors import ParameterError, WindowError
from calderon.instances import InstanceShape, generate_instances, instance_rng, random_sequence
from calderon.sequences import (
    Sequence,
    SpaceParams,
    YTable,
    b_norm,
    b_norm_y,
    cutoff,
    exponent_ratio,
    f_norm,
    interpolate_exponent,
    interpolate_params,
    lift_seq,
    norm,
    read_sequence,
    ring_convergence_profile,
    write_sequence,
)
from calderon.weights import Constant, Exponential, Power, level_masses

INF = math.inf
WIN = Window(1, 3, 1)


def two_entries(win=WIN):
    return Sequence.from_entries(win, {(0, (0,)): 1.0, (1, (0,)): 1.0})


def test_f_norm_examples():
    one = Sequence.from_entries(WIN, {(0, (0,)): 1.0})
    assert f_norm(one, SpaceParams(0, 2, 2)) == pytest.approx(1.0)
    assert f_norm(two_entries(), SpaceParams(1, 1, 1)) == pytest.approx(2.0)
    assert f_norm(two_entries(), SpaceParams(1, 1, INF)) == pytest.approx(1.5)


def test_b_norm_examples():
    assert b_norm(two_entries(), SpaceParams(1, 1, 1, "B")) == pytest.approx(2.0)
    assert b_norm(two_entries(), SpaceParams(1, INF, INF, "B")) == pytest.approx(2.0)
    single = Sequence.from_entries(WIN, {(2, (-3,)): 0.7})
    assert b_norm(single, SpaceParams(1.5, 3, 2, "B")) == pytest.approx(2**3 * 0.7 * 2 ** (-2 / 3))


def test_b_norm_y_examples():
    one = Sequence.from_entries(WIN, {(0, (0,)): 1.0})
    levels = [np.full(WIN.level_shape(j), np.nan) for j in range(WIN.j_max + 1)]
    levels[0][WIN.position((0, (0,)))] = 4.0
    y = YTable(WIN, levels)
    assert b_norm_y(one, 0, 2, 1, y) == pytest.approx(2.0)
    lam = random_sequence(instance_rng(3, 0), InstanceShape(1, 3, 1, nnz=6))
    assert b_norm_y(lam, 0.3, 1.5, 2, YTable.volumes(WIN)) == pytest.approx(
        b_norm(lam, SpaceParams(0.3, 1.5, 2, "B")), rel=1e-13)
    with pytest.raises(ParameterError):
        b_norm_y(two_entries(), 0, 2, 1, y)
    # p = inf ignores y entirely
    assert b_norm_y(two_entries(), 1, INF, INF, None) == pytest.approx(2.0)


def naive_f_norm(lam, s, p, q, w):
    """Loop over finest cells and walk up to every ancestor."""
    win = lam.window
    J = win.j_max
    masses = level_masses(w, win)[J]
    total = 0.0
    for m in range(win.side(J)):
        vals = []
        for j in range(J + 1):
            pos = m // 2 ** (J - j)
            vals.append(2 ** (j * s) * abs(lam.levels[j][pos]))
        S = max(vals) if q == INF else sum(v**q for v in vals) ** (1 / q)
        total += S**p * masses[m]
    return total ** (1 / p)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.5, INF])
def test_vectorized_f_norm_matches_naive_loop(q):
    w = Power(0.5)
    for lam in generate_instances(11, 5, InstanceShape(1, 4, 2, nnz=15)):
        got = f_norm(lam, SpaceParams(0.7, 1.5, q, "F", w))
        assert got == pytest.approx(naive_f_norm(lam, 0.7, 1.5, q, w), rel=1e-12)


def test_f_equals_b_when_p_equals_q():
    w = Exponential(0.5)
    for lam in generate_instances(5, 5, InstanceShape(1, 4, 2, nnz=12)):
        f = f_norm(lam, SpaceParams(-0.4, 1.7, 1.7, "F", w))
        b = b_norm(lam, SpaceParams(-0.4, 1.7, 1.7, "B", w))
        assert f == pytest.approx(b, rel=1e-12)


exps = st.sampled_from([0.5, 1.0, 4 / 3, 2.0, 4.0])
seeds = st.integers(0, 2**32 - 1)


def _pair(seed):
    shape = InstanceShape(1, 3, 1, nnz=6)
    return random_sequence(instance_rng(seed, 0), shape), random_sequence(instance_rng(seed, 1), shape)


@settings(max_examples=40, deadline=None)
@given(seeds, exps, st.sampled_from([0.5, 1.0, 2.0, INF]), st.sampled_from(["F", "B"]),
       st.floats(0.01, 100))
def test_homogeneity(seed, p, q, scale, c):
    lam, _ = _pair(seed)
    P = SpaceParams(0.5, p, q, scale, Power(0.3))
    assert norm(lam * c, P) == pytest.approx(c * norm(lam, P), rel=1e-11)


@settings(max_examples=40, deadline=None)
@given(seeds, exps, st.sampled_from([0.5, 1.0, 2.0, INF]), st.sampled_from(["F", "B"]))
def test_r_triangle(seed, p, q, scale):
    lam, mu = _pair(seed)
    P = SpaceParams(-0.5, p, q, scale, Power(0.3))
    r = min(1.0, p, q)
    lhs = norm(lam + mu, P) ** r
    assert lhs <= (norm(lam, P) ** r + norm(mu, P) ** r) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, exps, st.sampled_from([0.5, 2.0, INF]), st.sampled_from(["F", "B"]))
def test_lattice_monotone(seed, p, q, scale):
    lam, mu = _pair(seed)
    big = Sequence(lam.window, tuple(np.abs(a) + np.abs(b) for a, b in zip(lam.levels, mu.levels)))
    P = SpaceParams(0.2, p, q, scale)
    assert norm(lam, P) <= norm(big, P) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, exps, st.floats(0.3, 3.0), st.floats(0.0, 3.0), st.sampled_from(["F", "B"]))
def test_q_monotone(seed, p, q, dq, scale):
    lam, _ = _pair(seed)
    small = norm(lam, SpaceParams(0.0, p, q + dq, scale))
    assert small <= norm(lam, SpaceParams(0.0, p, q, scale)) * (1 + 1e-12)
    assert norm(lam, SpaceParams(0.0, p, INF, scale)) <= small * (1 + 1e-12)


def test_sequence_io_roundtrip():
    for cplx in (False, True):
        lam = random_sequence(instance_rng(1, 0), InstanceShape(2, 2, 1, nnz=10, complex=cplx))
        buf = io.StringIO()
        write_sequence(lam, buf)
        buf.seek(0)
        back = read_sequence(buf)
        assert back.window == lam.window
        for a, b in zip(lam.levels, back.levels):
            np.testing.assert_array_equal(a, b)


def test_read_sequence_needs_a_window():
    with pytest.raises(ParameterError):
        read_sequence(io.StringIO("0 0 1.0\n"))
    lam = read_sequence(io.StringIO("# comment\n0 -1 2.5\n"), window=WIN)
    assert lam[(0, (-1,))] == 2.5
    with pytest.raises(WindowError):
        read_sequence(io.StringIO("window 1 1 1\n3 0 1.0\n"))


def test_cutoff():
    win = Window(1, 3, 2)
    lam = random_sequence(instance_rng(2, 0), InstanceShape(1, 3, 2, levels=(0, 3), nnz=None))
    assert cutoff(lam, 50).allclose(lam)
    kept = cutoff(lam, 0).entries()
    assert set(kept) == {idx for idx in kept if idx.j == 0 and idx.k == (0,)}
    assert len(kept) == 1
    tail = lam - cutoff(lam, 1)
    assert all(idx.j > 1 or abs(idx.k[0]) > 1 for idx in tail.entries())
    with pytest.raises(ParameterError):
        cutoff(lam, -1)
    assert win == lam.window


def test_ring_profile_geometric():
    J = 8
    win = Window(1, J, 1)
    lam = Sequence.from_entries(win, {(j, (0,)): 2.0**-j for j in range(J + 1)})
    P = SpaceParams(0, 1, 1, "B")
    prof = ring_convergence_profile(lam, P, range(J))
    for M, v in enumerate(prof):
        exact = sum(4.0**-j for j in range(M + 1, J + 1))
        assert v == pytest.approx(exact, rel=1e-13)
    assert ring_convergence_profile(lam, P, [J]) == [0.0]


def test_lift_is_an_isometry():
    assert lift_seq(two_entries(), 0).allclose(two_entries())
    single = Sequence.from_entries(WIN, {(2, (1,)): 3.0})
    assert lift_seq(single, 1.5)[(2, (1,))] == pytest.approx(3.0 * 2**3)
    w = Power(-0.3)
    for lam in generate_instances(4, 5, InstanceShape(1, 4, 2, nnz=12)):
        for scale in ("F", "B"):
            a = norm(lift_seq(lam, 1.5), SpaceParams(-1.0, 2, 3, scale, w))
            b = norm(lam, SpaceParams(0.5, 2, 3, scale, w))
            assert a == pytest.approx(b, rel=1e-12)


def test_interpolate_params_exact():
    P0 = SpaceParams(Fraction(0), Fraction(1), Fraction(4))
    P1 = SpaceParams(Fraction(1), Fraction(2), Fraction(2))
    assert interpolate_params(P0, P1, Fraction(1, 2)) == (Fraction(1, 2), Fraction(4, 3), Fraction(8, 3))
    assert interpolate_params(P0, P0, Fraction(1, 3)) == (0, 1, 4)
    assert interpolate_exponent(INF, 2, 0.5) == pytest.approx(4.0)
    assert interpolate_exponent(INF, INF, 0.5) == INF
    with pytest.raises(ParameterError):
        interpolate_params(P0, P1, 1)


def test_exponent_ratio_limits():
    assert exponent_ratio(2.0, INF) == 0.0
    assert exponent_ratio(INF, INF) == 1.0
    assert exponent_ratio(3.0, 2.0) == 1.5
    with pytest.raises(ParameterError):
        exponent_ratio(INF, 2.0)


def test_space_params_validation():
    with pytest.raises(ParameterError):
        SpaceParams(0, 2, 2, "X")
    with pytest.raises(ParameterError):
        SpaceParams(0, 0, 2)
    with pytest.raises(ParameterError):
        SpaceParams(0, INF, 2, "F")
    with pytest.raises(ParameterError):
        SpaceParams(0, 2, 2, "F", YTable.volumes(WIN))
    # the weight is dropped for p = inf
    assert isinstance(SpaceParams(0, INF, 2, "B", Power(0.5)).weight, Constant)
    with pytest.raises(ParameterError):
        f_norm(two_entries(), SpaceParams(0, 2, 2, "B"))
    with pytest.raises(ParameterError):
        b_norm(two_entries(), SpaceParams(0, 2, 2, "F"))


def test_ytable_validation():
    with pytest.raises(ParameterError):
        YTable(WIN, [np.zeros(WIN.level_shape(j)) for j in range(WIN.j_max + 1)])
    with pytest.raises(WindowError):
        YTable(WIN, [np.ones(2)])
