import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from dynhawkes.autodiff import softplus
from dynhawkes.dynamics import (ConstantDynamics, LinearRampDynamics, MixtureIntegralDynamics,
                                PiecewiseConstantDynamics, analytic_dynamics, dynamics_from_dict, export_grid)


def random_dynamics(seed, num_marks=2, per_dimension=False):
    """Mixture dynamics with every raw parameter drawn wide, so activations saturate in places."""
    rng = np.random.default_rng(seed)
    dyn = MixtureIntegralDynamics.init(num_marks, int(rng.integers(1, 4)), int(rng.integers(1, 4)), 4,
                                       t_scale=float(rng.uniform(1, 50)), seed=rng, per_dimension=per_dimension)
    for arr in dyn.parameters().values():
        arr[...] = rng.normal(0.0, 3.0, size=arr.shape)
    return dyn


@given(seed=st.integers(0, 10_000), per_dim=st.booleans())
def test_monotone_for_any_parameters(seed, per_dim):
    dyn = random_dynamics(seed, per_dimension=per_dim)
    grid = np.sort(np.random.default_rng(seed).uniform(0, 100, 2000))
    for m in range(dyn.num_marks):
        F, f = dyn.evaluate(m, grid)
        assert np.all(np.diff(F) >= -1e-12 * np.maximum(1.0, np.abs(F[1:])))
        assert np.all(f >= 0)


def test_effective_weights_non_negative():
    dyn = random_dynamics(5)
    for row in dyn.nets:
        for net in row:
            ws, out = net.effective_weights()
            assert all(np.all(w >= 0) for w in ws) and np.all(out >= 0)


def test_anchor_at_zero():
    dyn = random_dynamics(1)
    assert dyn.integral_value(0, 0.0) == 0.0
    assert dyn.evaluate(1, 0.0)[0] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_integral_matches_quadrature_of_derivative(seed):
    dyn = MixtureIntegralDynamics.init(2, 3, 2, 8, t_scale=2.0, seed=seed, scale=1.0)
    rng = np.random.default_rng(seed)
    a, b = np.sort(rng.uniform(0, 5, 2))
    for m in range(2):
        numeric, _ = quad(lambda t: dyn.derivative_value(m, t), a, b, epsabs=1e-13, epsrel=1e-12)
        exact = dyn.integral_value(m, b) - dyn.integral_value(m, a)
        assert exact == pytest.approx(numeric, rel=1e-6)
    numeric, _ = quad(lambda t: dyn.derivative_value(0, t), 0, 2, epsabs=1e-13, epsrel=1e-12)
    assert dyn.integral_value(0, 2.0) == pytest.approx(numeric, rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_derivative_matches_finite_difference(seed):
    dyn = MixtureIntegralDynamics.init(1, 3, 3, 8, t_scale=3.0, seed=seed, scale=1.0)
    t = float(np.random.default_rng(seed).uniform(0.5, 5))
    h = 1e-5
    fd = (dyn.integral_value(0, t + h) - dyn.integral_value(0, t - h)) / (2 * h)
    assert dyn.derivative_value(0, t) == pytest.approx(fd, rel=1e-5)
    # reverse mode with t as a leaf agrees with the forward tangent
    assert dyn.derivative_by_reverse_mode(0, t) == pytest.approx(dyn.derivative_value(0, t), rel=1e-12)


def test_tape_and_numpy_paths_agree():
    dyn = random_dynamics(3)
    t = np.linspace(0, 40, 17)
    for m in range(dyn.num_marks):
        F, f = dyn.evaluate(m, t)
        np.testing.assert_allclose(dyn.integral_value(m, t), F, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(dyn.derivative_value(m, t), f, rtol=1e-12, atol=1e-12)


def test_parameter_vjp_matches_finite_differences():
    dyn = MixtureIntegralDynamics.init(2, 2, 2, 3, t_scale=4.0, seed=2, scale=0.7)
    t = np.array([0.3, 1.1, 2.5, 3.9])
    rng = np.random.default_rng(0)
    wF, wf = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
    _, _, vjp = dyn.values_and_vjp(t)
    grads = vjp(wF, wf)

    def objective():
        F, f, _ = dyn.values_and_vjp(t)
        return float(np.sum(F * wF) + np.sum(f * wf))

    for name, arr in dyn.parameters().items():
        flat = arr.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + 1e-6
            up = objective()
            flat[i] = old - 1e-6
            down = objective()
            flat[i] = old
            fd = (up - down) / 2e-6
            assert grads[name].reshape(-1)[i] == pytest.approx(fd, rel=1e-5, abs=1e-8), name


def test_identity_reduces_to_elapsed_time():
    dyn = MixtureIntegralDynamics.identity(3, t_scale=10.0, seed=4)
    t = np.linspace(0, 30, 101)
    for m in range(3):
        F, f = dyn.evaluate(m, t)
        np.testing.assert_array_equal(F, t)
        np.testing.assert_array_equal(f, np.ones_like(t))
    assert softplus(np.float64(dyn.b0_raw)) == 1.0


def test_export_grid_constant():
    assert export_grid(ConstantDynamics(1, 1.0), 0, 0, 2, 3) == [(0, 1, 0), (1, 1, 1), (2, 1, 2)]
    with pytest.raises(ValueError):
        export_grid(ConstantDynamics(1), 0, 0, 1, 1)


def test_export_grid_matches_pointwise_calls():
    dyn = random_dynamics(8)
    rows = export_grid(dyn, 1, 0.0, 20.0, 11)
    for t, f, F in rows:
        assert f == dyn.derivative_value(1, t) or f == pytest.approx(dyn.derivative_value(1, t), rel=1e-14)
        assert F == pytest.approx(dyn.integral_value(1, t), rel=1e-14, abs=1e-14)
    assert all(b[2] >= a[2] for a, b in zip(rows, rows[1:]))


def test_piecewise_integral_by_hand():
    dyn = PiecewiseConstantDynamics(1, [0, 50], [1.0, 0.25])
    for t, expected in [(10, 10), (50, 50), (60, 52.5), (100, 62.5)]:
        assert dyn.evaluate(0, t)[0] == pytest.approx(expected)
        numeric, _ = quad(lambda s: dyn.evaluate(0, s)[1], 0, t, points=[50], limit=100)
        assert dyn.evaluate(0, t)[0] == pytest.approx(numeric, rel=1e-10)
    assert dyn.max_derivative(0, 60, 70) == 0.25


@pytest.mark.parametrize("intercept, slope", [(1.0, 0.5), (2.0, -0.5), (-1.0, 0.5), (0.5, 0.0)])
def test_linear_ramp_matches_quadrature(intercept, slope):
    dyn = LinearRampDynamics(1, intercept, slope)
    for t in (0.5, 2.0, 3.0, 7.0):
        numeric, _ = quad(lambda s: dyn.evaluate(0, s)[1], 0, t, points=[2.0], limit=100)
        assert dyn.evaluate(0, t)[0] == pytest.approx(numeric, rel=1e-10, abs=1e-12)


def test_serialisation_round_trip():
    dyn = random_dynamics(11, per_dimension=True)
    again = dynamics_from_dict(dyn.to_dict(), 2)
    t = np.linspace(0, 10, 7)
    for m in range(2):
        np.testing.assert_array_equal(again.evaluate(m, t)[0], dyn.evaluate(m, t)[0])
    spec = PiecewiseConstantDynamics(2, [0, 1], [2, 3]).to_dict()
    assert dynamics_from_dict(spec, 2).evaluate(0, 2.0)[0] == 5.0


def test_unknown_analytic_spec():
    with pytest.raises(ValueError, match="unknown dynamics"):
        analytic_dynamics({"type": "sine"}, 1)
