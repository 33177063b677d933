import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from dynhawkes.baselines import (INTENSITY_FLOOR, MODEL_TYPES, HawkesModel, HppModel, RppModel,
                                 SelfCorrectingModel)
from dynhawkes.events import make_sequence
from dynhawkes.models import identity_dhp, model_from_dict

from conftest import flat_gradient, numeric_gradient, quadrature_nll


def counting_models():
    return [
        HppModel.from_rates([0.8, 1.7, 0.3]),
        SelfCorrectingModel.from_values([-0.5, 0.2, -1.0], [0.3, 0.5, 0.2], [1.5, 0.8, 2.0]),
        RppModel.from_values([1.5, 2.0, 1.0], [0.8, 1.2, 0.6]),
    ]


def test_hpp_nll_by_hand():
    seq = make_sequence([1.0, 2.0], [0, 0], horizon=3.0)
    model = HppModel.from_rates([2.0])
    assert model.nll(seq).total == pytest.approx(-2 * math.log(2) + 6, rel=1e-14)
    assert model.nll(seq).total == pytest.approx(4.6137056389, rel=1e-10)


def test_selfcorrecting_intensity_at_origin():
    model = SelfCorrectingModel.from_values([0.0], [0.7], [1.0])
    assert model.intensity(0, 0.0) == 1.0
    # one earlier event lowers the rate by exp(-beta rho)
    assert model.intensity(0, 1.0, [0.5], [0]) == pytest.approx(math.exp(0.7 * (1.0 - 1.0)))


def test_rpp_floor_before_first_event():
    model = RppModel.from_values([1.0], [0.5])
    assert model.intensity(0, 2.0) == 0.0
    seq = make_sequence([2.0, 3.0], [0, 0], horizon=4.0)
    res = model.nll(seq)
    assert res.log_intensity[0] == pytest.approx(math.log(INTENSITY_FLOOR))
    assert res.notes["floored_events"] == 1


def test_hawkes_intensity_hand_value():
    model = HawkesModel.from_values([0.1], [[0.5]], [1.0], "exp")
    assert model.intensity(0, 2.0, [1.0], [0]) == pytest.approx(0.2839397, abs=1e-7)


@pytest.mark.parametrize("kernel", ["exp", "pwl", "ray"])
def test_hawkes_matches_frozen_identity_dhp(kernel, small_seq):
    rng = np.random.default_rng(1)
    model = HawkesModel.from_values(rng.uniform(0.1, 0.5, 3), rng.uniform(0.1, 0.6, (3, 3)),
                                    rng.uniform(0.5, 2, 3), kernel)
    dhp = identity_dhp(model)
    assert model.nll(small_seq).total == pytest.approx(dhp.nll(small_seq).total, abs=1e-10)
    # the direct route and the per-event decomposition agree
    loss, _ = model.loss_and_grad(small_seq)
    assert loss == pytest.approx(model.nll(small_seq).total, abs=1e-10)


@pytest.mark.parametrize("model", counting_models(), ids=lambda m: m.model_type)
def test_counting_compensators_match_quadrature(model):
    rng = np.random.default_rng(2)
    hist = np.sort(rng.uniform(0.0, 5.0, 12))
    marks = rng.integers(0, 3, 12)
    for _ in range(20):
        a = float(rng.uniform(5, 12))
        b = a + float(rng.uniform(0.01, 5))
        m = int(rng.integers(0, 3))
        numeric, _ = quad(lambda t: model.intensity(m, t, hist, marks), a, b, epsabs=1e-14, epsrel=1e-12,
                          limit=200)
        assert model.compensator_increment(m, a, b, hist, marks) == pytest.approx(numeric, rel=1e-6, abs=1e-14)


@given(alpha=st.floats(-2, 2), beta=st.floats(0.05, 3), rho=st.floats(0.05, 3), a=st.floats(0, 20),
       w=st.floats(0.001, 10), n=st.integers(0, 30))
def test_selfcorrecting_compensator_property(alpha, beta, rho, a, w, n):
    model = SelfCorrectingModel.from_values([alpha], [beta], [rho])
    hist = np.linspace(0, a, n, endpoint=False) if n else np.empty(0)
    numeric, _ = quad(lambda t: model.intensity(0, t, hist, np.zeros(n, int)), a, a + w, epsabs=0, epsrel=1e-12,
                      limit=200)
    assert model.compensator_increment(0, a, a + w, hist, np.zeros(n, int)) == pytest.approx(numeric, rel=1e-6)


@given(alpha=st.floats(-1, 3), beta=st.floats(0.2, 3), a=st.floats(0, 30), w=st.floats(0.001, 30))
def test_rpp_compensator_property(alpha, beta, a, w):
    model = RppModel.from_values([alpha], [beta])
    hist, marks = np.array([0.0]), np.array([0])
    # in log-time the log-normal integrand is a smooth Gaussian bump
    lo = math.log(a) if a > 0 else -math.inf
    numeric, _ = quad(lambda u: model.intensity(0, math.exp(u), hist, marks) * math.exp(u), lo, math.log(a + w),
                      epsabs=1e-15, epsrel=1e-12, limit=400)
    assert model.compensator_increment(0, a, a + w, hist, marks) == pytest.approx(numeric, rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("model", counting_models(), ids=lambda m: m.model_type)
def test_counting_nll_matches_quadrature(model, small_seq):
    window = small_seq.window(4.0, 18.0)
    assert model.nll(window).total == pytest.approx(quadrature_nll(model, window), rel=1e-6)


@pytest.mark.parametrize("model", counting_models() + [HawkesModel.from_values([0.2, 0.3, 0.1], np.full((3, 3), 0.2),
                                                                               [1.0, 2.0, 0.5], "pwl")],
                         ids=lambda m: m.model_type)
def test_gradients_match_finite_differences(model, small_seq):
    seq = small_seq.window(3.0, 21.0)  # keeps RPP away from floored events
    _, grads = model.loss_and_grad(seq)
    np.testing.assert_allclose(flat_gradient(model, grads), numeric_gradient(model, seq), rtol=1e-5, atol=1e-7)


def test_hpp_predictions_are_rate_times_width(small_seq):
    model = HppModel.from_rates([0.8, 1.7, 0.3])
    counts = model.predict_counts(small_seq, [0.0, 0.5, 2.0])
    np.testing.assert_allclose(counts, [[0.4, 0.85, 0.15], [1.2, 2.55, 0.45]], rtol=1e-14)


@pytest.mark.parametrize("model", counting_models() + [HawkesModel.from_values([0.2], [[0.5]], [1.0], "ray")],
                         ids=lambda m: m.model_type)
def test_checkpoint_round_trip(model):
    again = model_from_dict(model.to_dict())
    assert type(again) is type(model)
    np.testing.assert_array_equal(again.get_flat(), model.get_flat())


def test_model_registry_is_complete():
    for kind in MODEL_TYPES:
        with pytest.raises((KeyError, TypeError, ValueError)):
            model_from_dict({"model_type": kind, "params": {}, "meta": {}})
    with pytest.raises(ValueError, match="unknown model type"):
        model_from_dict({"model_type": "rmtpp", "params": {}, "meta": {}})
