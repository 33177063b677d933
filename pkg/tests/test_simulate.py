import json

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from dynhawkes.baselines import HawkesModel, HppModel, RppModel, SelfCorrectingModel
from dynhawkes.evaluate import residual_diagnostics
from dynhawkes.events import format_events_csv, load_events
from dynhawkes.models import DhpModel, inject_dynamics
from dynhawkes.simulate import RNG_NAME, SimConfig, thinning_simulate, write_simulation

PIECEWISE = {"type": "piecewise", "breaks": [0, 50], "values": [1.0, 0.25]}


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(horizon=0.0)
    with pytest.raises(ValueError):
        SimConfig(horizon=1.0, max_events=0)
    with pytest.raises(ValueError):
        SimConfig(horizon=1.0, refresh_interval=0.0)


def test_hpp_rate_clt():
    seq = thinning_simulate(HppModel.from_rates([2.0]), SimConfig(horizon=10_000, seed=0))
    assert abs(len(seq) / 10_000 - 2.0) <= 0.06


def test_hawkes_stationary_rate():
    # branching ratio alpha / beta = 0.5, so the mean rate is 0.5 / (1 - 0.5) = 1
    model = HawkesModel.from_values([0.5], [[1.0]], [2.0], "exp")
    seq = thinning_simulate(model, SimConfig(horizon=15_000, seed=0))
    assert len(seq) / 15_000 == pytest.approx(1.0, rel=0.05)


def test_unexcited_dhp_is_poisson():
    model = inject_dynamics(HawkesModel.from_values([0.5], [[0.0]], [1.0], "exp"), PIECEWISE)
    seq = thinning_simulate(model, SimConfig(horizon=4000, seed=3))
    gaps = np.diff(np.concatenate([[0.0], seq.times]))
    assert stats.kstest(gaps, "expon", args=(0, 1 / 0.5)).pvalue > 0.01


def test_seed_determinism():
    model = DhpModel.init(2, "ray", 2, 2, 4, t_scale=50.0, seed=1, mu=0.3)
    runs = [format_events_csv(thinning_simulate(model, SimConfig(horizon=100, seed=7))) for _ in range(2)]
    assert runs[0] == runs[1]
    other = format_events_csv(thinning_simulate(model, SimConfig(horizon=100, seed=8)))
    assert other != runs[0]


def test_constant_one_dynamics_reproduce_hawkes():
    hawkes = HawkesModel.from_values([1.0], [[0.5]], [1.0], "exp")
    dhp = inject_dynamics(hawkes, {"type": "constant", "value": 1.0})
    a = thinning_simulate(hawkes, SimConfig(horizon=300, seed=5))
    b = thinning_simulate(dhp, SimConfig(horizon=300, seed=5))
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.marks, b.marks)


@pytest.mark.parametrize("model, horizon", [
    (HawkesModel.from_values([0.2, 0.3], [[0.3, 0.1], [0.2, 0.3]], [1.0, 1.5], "exp"), 3000),
    (HawkesModel.from_values([0.2, 0.3], [[2.0, 5.0], [4.0, 2.5]], [2.0, 2.0], "pwl"), 2000),
    (inject_dynamics(HawkesModel.from_values([0.3, 0.3], [[0.5, 0.2], [0.2, 0.5]], [1.0, 1.0], "exp"),
                     {"type": "piecewise", "breaks": [0, 1000], "values": [1.0, 0.25]}), 2000),
    (inject_dynamics(HawkesModel.from_values([0.4], [[0.6]], [0.8], "ray"),
                     {"type": "linear", "intercept": 0.5, "slope": 0.001}), 2000),
    (SelfCorrectingModel.from_values([0.0, 0.5], [0.5, 0.5], [1.0, 0.5]), 500),
    (HppModel.from_rates([0.5, 1.5]), 1000),
], ids=["hawkes-exp", "hawkes-pwl", "dhp-piecewise", "dhp-ramp-ray", "selfcorrecting", "hpp"])
def test_time_rescaling_residuals(model, horizon):
    seq = thinning_simulate(model, SimConfig(horizon=horizon, seed=11))
    for res in residual_diagnostics(model, seq):
        assert res.status == "ok" and res.pass_1pct, res


def test_rpp_with_conditioning_history():
    model = RppModel.from_values([2.0], [1.0])
    seq = thinning_simulate(model, SimConfig(horizon=200.0, seed=4, start=1.0), history=([0.5], [0]))
    assert len(seq) > 0 and seq.start == 1.0
    assert seq.history_times.tolist() == [0.5]


def test_supercritical_warning_and_cap():
    model = HawkesModel.from_values([1.0], [[2.0]], [1.0], "exp")
    with pytest.warns(RuntimeWarning) as caught:
        seq, st = thinning_simulate(model, SimConfig(horizon=1e6, seed=0, max_events=300), return_stats=True)
    messages = [str(w.message) for w in caught]
    assert any("possibly supercritical" in m for m in messages)
    assert any("cap" in m for m in messages)
    assert len(seq) == 300 and st.truncated
    assert seq.horizon > seq.times[-1]


def test_bound_is_never_exceeded():
    model = DhpModel.init(2, "ray", 3, 2, 8, t_scale=100.0, seed=3, mu=0.2)
    _, st = thinning_simulate(model, SimConfig(horizon=100, seed=1), return_stats=True)
    assert st.bound_violations == 0 and st.accepted > 0


def test_injected_piecewise_dynamics():
    model = inject_dynamics(HawkesModel.from_values([0.5], [[0.5]], [1.0], "exp"), PIECEWISE)
    for t in (25.0, 50.0, 80.0):
        numeric, _ = quad(lambda s: model.dynamics.evaluate(0, s)[1], 0, t, points=[50])
        assert model.dynamics.evaluate(0, t)[0] == pytest.approx(numeric, rel=1e-12)
    assert model.transformed_interval(0, 60.0, 40.0) == pytest.approx(10.0 + 2.5)
    with pytest.raises(ValueError):
        inject_dynamics(model, {"type": "spline"})


def test_write_simulation(tmp_path):
    model = HawkesModel.from_values([0.5, 0.2], [[0.3, 0.1], [0.1, 0.3]], [1.0, 1.0], "exp")
    config = SimConfig(horizon=50, seed=9)
    seq, st = thinning_simulate(model, config, mark_labels=("a", "b"), return_stats=True)
    path = tmp_path / "sim.csv"
    side = write_simulation(seq, path, model, config, st)
    meta = json.loads(open(side).read())
    assert meta["rng"] == RNG_NAME and meta["config"]["seed"] == 9
    assert meta["generator"]["model_type"] == "hawkes"
    again = load_events(path, manifest=["a", "b"])
    np.testing.assert_array_equal(again.times, seq.times)
