import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bretp import (AcidDistribution, Partition, RandomTelegraphParams, build_boundary_matrix,
                   dark_current_model, rt_closed_form_rate, wasserstein1)
from bretp.core import phi

rates = st.floats(0.02, 3.0)
gains = st.floats(0.2, 4.0)


@settings(max_examples=15, deadline=None)
@given(k1=rates, k2=rates, c=gains, l0=st.floats(0.05, 1.0))
def test_dark_current_matrix_is_column_stochastic(k1, k2, c, l0):
    m = dark_current_model(RandomTelegraphParams(k1, k2, c, l0))
    I = build_boundary_matrix(m, Partition.for_model(m, 30))
    A = I.dense()
    assert np.all(A >= 0)
    assert np.allclose(A.sum(0), 1.0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(k1=rates, k2=rates, c=gains, l0=st.floats(0.01, 2.0))
def test_jump_map_is_increasing_and_lands_below_on_level(k1, k2, c, l0):
    p = RandomTelegraphParams(k1, k2, c, l0)
    x = np.linspace(p.roots[0], p.lambda1, 50)
    y = p.jump_map(x)
    assert np.all(np.diff(y) > 0)
    assert np.all(y <= p.lambda1 + 1e-12)
    assert np.all(y >= x - 1e-12)


@settings(max_examples=40, deadline=None)
@given(k1=rates, k2=rates, c=gains)
def test_telegraph_rate_bounds(k1, k2, c):
    p = RandomTelegraphParams(k1, k2, c)
    r = rt_closed_form_rate(p).rate
    # a perfect observer of the input: E[phi(lambda)] - phi(E lambda)
    perfect = p.p_on * phi(c) - phi(c * p.p_on)
    assert 0 <= r <= perfect + 1e-10
    assert r == pytest.approx(c * rt_closed_form_rate(RandomTelegraphParams(k1 / c, k2 / c)).rate,
                              rel=1e-8)


def _hist(seed):
    rng = np.random.default_rng(seed)
    return AcidDistribution(np.sort(rng.uniform(-3, 3, 31)), rng.random(30))


@settings(max_examples=40, deadline=None)
@given(a=st.integers(0, 10 ** 6), b=st.integers(0, 10 ** 6), c=st.integers(0, 10 ** 6),
       shift=st.floats(-2, 2))
def test_w1_is_a_translation_equivariant_metric(a, b, c, shift):
    A, B, C = _hist(a), _hist(b), _hist(c)
    ab = wasserstein1(A, B)
    assert ab >= 0
    assert ab == pytest.approx(wasserstein1(B, A), abs=1e-12)
    assert wasserstein1(A, C) <= ab + wasserstein1(B, C) + 1e-12
    moved = AcidDistribution(A.edges + shift, A.weights)
    assert wasserstein1(A, moved) == pytest.approx(abs(shift), abs=1e-9)
    # W1 bounds the difference in means
    assert abs(A.mean - B.mean) <= ab + 1e-12
