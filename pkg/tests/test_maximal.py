import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calderon.dyadic import Window
from calderon.errors import ParameterError
from calderon.instances import instance_rng, random_cell_function
from calderon.maximal import (
    CellFunction,
    m_loc,
    read_cell_function,
    vv_maximal_constant,
    write_cell_function,
)
from calderon.weights import Constant, Power

WIN = Window(1, 4, 1)


def test_constant_is_fixed():
    f = CellFunction(WIN, np.full(WIN.finest_shape, 2.5))
    np.testing.assert_allclose(m_loc(f).values, 2.5)


def test_indicator_averages():
    J = WIN.j_max
    cell = (J, (3,))
    f = CellFunction.indicator(WIN, cell)
    m = m_loc(f).values
    hot = WIN.position(cell)[0]
    for pos in range(WIN.side(J)):
        if pos == hot:
            assert m[pos] == 1.0
            continue
        # the deepest ancestor shared with the hot cell sets the value
        if (pos < WIN.offset(J)) != (hot < WIN.offset(J)):
            assert m[pos] == 0.0
            continue
        j = max(j for j in range(J + 1) if pos >> (J - j) == hot >> (J - j))
        assert m[pos] == 2.0 ** -(J - j)


def _fn(seed):
    return random_cell_function(instance_rng(seed, 0), WIN)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.floats(0.01, 100))
def test_sublinear_homogeneous_monotone(a, b, c):
    f, g = _fn(a), _fn(b)
    mf, mg = m_loc(f).values, m_loc(g).values
    assert np.all(m_loc(f + g).values <= (mf + mg) * (1 + 1e-12))
    np.testing.assert_allclose(m_loc(f * c).values, c * mf, rtol=1e-12)
    assert np.all(m_loc(f + g).values >= mf * (1 - 1e-12))
    assert np.all(mf >= f.values)


def test_vv_constant_of_constant_family_is_one():
    fam = [CellFunction(WIN, np.full(WIN.finest_shape, c)) for c in (1.0, 3.0)]
    assert vv_maximal_constant(fam, 2, 2, Power(0.5)) == pytest.approx(1.0, rel=1e-13)


def test_vv_constant_single_indicator():
    f = CellFunction.indicator(WIN, (WIN.j_max, (0,)))
    r = vv_maximal_constant([f], 2, 2, Constant())
    # ||m_loc f||_2^2 = sum over ancestor levels of (block size) * 4^{-(J-j)}, divided by ||f||_2^2
    J = WIN.j_max
    num = 1 + sum(2 ** (J - j - 1) * 4.0 ** -(J - j) for j in range(J))
    assert r == pytest.approx(math.sqrt(num), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([1.5, 2.0, 4.0]), st.sampled_from([1.5, 2.0, math.inf]))
def test_vv_constant_at_least_one(seed, p, q):
    fam = [random_cell_function(instance_rng(seed, i), WIN) for i in range(3)]
    assert vv_maximal_constant(fam, p, q, Power(0.3)) >= 1 - 1e-12


def test_vv_errors():
    f = CellFunction.indicator(WIN, (0, (0,)))
    with pytest.raises(ParameterError):
        vv_maximal_constant([f], 1, 2, Constant())
    with pytest.raises(ParameterError):
        vv_maximal_constant([f], 2, 1, Constant())
    with pytest.raises(ParameterError):
        vv_maximal_constant([], 2, 2, Constant())
    with pytest.raises(ParameterError):
        vv_maximal_constant([f * 0.0], 2, 2, Constant())
    with pytest.raises(ParameterError):
        CellFunction(WIN, np.zeros(3))


def test_cell_function_roundtrip():
    f = _fn(9)
    buf = io.StringIO()
    write_cell_function(f, buf)
    buf.seek(0)
    back = read_cell_function(buf)
    assert back.window == WIN
    np.testing.assert_array_equal(back.values, f.values)
