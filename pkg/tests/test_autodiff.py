import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynhawkes import autodiff as ad
from dynhawkes.autodiff import DomainError, Tape, inverse_softplus, softplus

finite = st.floats(-3, 3, allow_nan=False)


def grad_of(fun, *xs):
    tape = Tape()
    leaves = [tape.var(x) for x in xs]
    out = fun(*leaves)
    return out.value, tape.gradient(out, leaves)


def fd(fun, *xs, h=1e-6):
    out = []
    for i in range(len(xs)):
        up = list(xs)
        down = list(xs)
        up[i] += h
        down[i] -= h
        out.append((fun(*up) - fun(*down)) / (2 * h))
    return out


@given(finite, finite)
def test_composite_gradient_matches_finite_differences(a, b):
    def f_var(x, y):
        return (x * y + x.exp()).tanh() + (y * y + 1.0).log() - x.softplus() / (y * y + 2.0)

    def f_num(x, y):
        return math.tanh(x * y + math.exp(x)) + math.log(y * y + 1.0) - math.log1p(math.exp(x)) / (y * y + 2.0)

    value, grads = grad_of(f_var, a, b)
    assert value == pytest.approx(f_num(a, b), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(grads, fd(f_num, a, b), rtol=1e-6, atol=1e-7)


def test_shared_subexpression_accumulates():
    # d/dx (x*x + x) = 2x + 1
    value, (g,) = grad_of(lambda x: x * x + x, 3.0)
    assert value == 12.0
    assert g == 7.0


def test_power_and_sigmoid():
    value, (g,) = grad_of(lambda x: x.power(2.5) + x.sigmoid(), 1.7)
    s = 1.0 / (1.0 + math.exp(-1.7))
    assert g == pytest.approx(2.5 * 1.7 ** 1.5 + s * (1 - s), rel=1e-12)


def test_array_valued_nodes_sum_scalar_leaf_gradients():
    tape = Tape()
    w = tape.var(0.5)
    t = tape.const(np.array([0.0, 1.0, 2.0]))
    y = (w * t).exp().sum()
    (g,) = tape.gradient(y, [w])
    assert g == pytest.approx(np.sum(np.array([0.0, 1.0, 2.0]) * np.exp(0.5 * np.array([0.0, 1.0, 2.0]))))


def test_seeded_backward_is_a_vector_jacobian_product():
    tape = Tape()
    w = tape.var(2.0)
    t = tape.const(np.array([1.0, 2.0]))
    y = w * w * t
    (g,) = tape.gradient(y, [w], seed=np.array([3.0, -1.0]))
    assert g == pytest.approx(2 * 2.0 * (3.0 * 1.0 - 1.0 * 2.0))


def test_linear_combination_single_node():
    tape = Tape()
    ws = [tape.var(v) for v in (1.0, 2.0, 3.0)]
    xs = [tape.var(v) for v in (4.0, 5.0, 6.0)]
    b = tape.var(0.5)
    n_before = len(tape)
    y = ad.linear_combination(ws, xs, b)
    assert len(tape) == n_before + 1
    assert y.value == 32.5
    grads = tape.gradient(y, ws + xs + [b])
    assert grads == [4.0, 5.0, 6.0, 1.0, 2.0, 3.0, 1.0]


def test_log_of_non_positive_raises():
    tape = Tape()
    with pytest.raises(DomainError):
        tape.var(0.0).log()
    with pytest.raises(DomainError):
        tape.var(-1.0).power(0.5)


def test_leaf_must_be_finite():
    with pytest.raises(DomainError):
        Tape().var(float("nan"))


def test_mixing_tapes_rejected():
    a, b = Tape().var(1.0), Tape().var(2.0)
    with pytest.raises(ValueError):
        a + b


def test_gradient_of_unused_leaf_is_zero():
    tape = Tape()
    x, y = tape.var(1.0), tape.var(2.0)
    assert tape.gradient(x * 3.0, [y]) == [0.0]


@given(st.floats(-50, 50))
def test_softplus_is_positive_and_inverse_roundtrips(x):
    y = softplus(x)
    assert y > 0
    if y > 1e-12:
        assert softplus(inverse_softplus(y)) == pytest.approx(y, rel=1e-9)


def test_softplus_is_stable_for_large_inputs():
    assert softplus(1000.0) == 1000.0
    assert softplus(-1000.0) == 0.0
    np.testing.assert_allclose(softplus(np.array([-800.0, 0.0, 800.0])), [0.0, math.log(2), 800.0])
