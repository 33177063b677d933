"""Ogata thinning for every model in the package.

Randomness comes from numpy's Philox4x64-10 counter-based generator seeded
with ``SimConfig.seed``, so a seed pins the sequence for this implementation.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .events import EventSequence, make_sequence, save_events
from .models import DhpModel, PointProcessModel, _HawkesFamily, inject_dynamics

log = logging.getLogger(__name__)

RNG_NAME = "numpy.random.Philox"


@dataclass
class SimConfig:
    horizon: float
    seed: int = 0
    max_events: int = 100_000
    refresh_interval: float | None = None  # bound lookahead; default horizon / 50
    start: float = 0.0

    def __post_init__(self):
        if not self.horizon > self.start:
            raise ValueError("horizon must be greater than start")
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")
        if self.refresh_interval is not None and not self.refresh_interval > 0:
            raise ValueError("refresh_interval must be > 0")


@dataclass
class SimStats:
    candidates: int = 0
    accepted: int = 0
    bound_violations: int = 0
    truncated: bool = False


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _check_stability(model: PointProcessModel) -> None:
    if not isinstance(model, _HawkesFamily):
        return
    radius = float(np.max(np.abs(np.linalg.eigvals(model.branching_matrix()))))
    if radius >= 1.0:
        warnings.warn(f"possibly supercritical: branching spectral radius {radius:.3f}", RuntimeWarning,
                      stacklevel=3)


def thinning_simulate(model: PointProcessModel, config: SimConfig, history=None, mark_labels=(),
                      return_stats: bool = False):
    """Sample events on (config.start, config.horizon) by thinning.

    Between candidates the total intensity is bounded over a lookahead window
    of length ``refresh_interval`` (shortened to the model's ``max_lookahead``); the bound is recomputed after every
    candidate, accepted or not. A candidate whose true intensity exceeds the
    bound is still accepted with probability 1 and counted as a violation.
    ``history`` is an optional (times, marks) pair that conditions the run.
    """
    _check_stability(model)
    rng = make_rng(config.seed)
    T = config.horizon
    lookahead = min(config.refresh_interval or (T - config.start) / 50.0, model.max_lookahead())
    prior_t = np.asarray(history[0], dtype=float) if history is not None else np.empty(0)
    prior_m = np.asarray(history[1], dtype=np.int64) if history is not None else np.empty(0, dtype=np.int64)
    n_prior = n = len(prior_t)
    buf_t = np.empty(max(2 * n_prior, 1024))
    buf_m = np.empty(len(buf_t), dtype=np.int64)
    buf_t[:n], buf_m[:n] = prior_t, prior_m
    stats = SimStats()
    t = config.start
    M = model.num_marks
    while t < T:
        window_end = min(t + lookahead, T)
        ht, hm = buf_t[:n], buf_m[:n]
        bound = model.intensity_upper_bound(t, window_end, ht, hm)
        if isinstance(model, DhpModel):
            # grid-based f bounds are heuristic; never fall below the current intensity
            bound = max(bound, float(model.intensities(t, ht, hm).sum()))
        if not bound > 0:
            t = window_end
            continue
        cand = t + rng.exponential(1.0 / bound)
        u = rng.random()
        if cand >= window_end:
            t = window_end
            continue
        stats.candidates += 1
        lam = model.intensities(cand, ht, hm)
        total = float(lam.sum())
        if total > bound * (1.0 + 1e-9):
            stats.bound_violations += 1
        t = cand
        if u * bound <= total:
            mark = int(rng.choice(M, p=lam / total)) if M > 1 else 0
            if n == len(buf_t):
                buf_t = np.concatenate([buf_t, np.empty(n)])
                buf_m = np.concatenate([buf_m, np.empty(n, dtype=np.int64)])
            buf_t[n], buf_m[n] = cand, mark
            n += 1
            stats.accepted += 1
            if stats.accepted >= config.max_events:
                stats.truncated = True
                warnings.warn(f"simulation stopped at the cap of {config.max_events} events", RuntimeWarning,
                              stacklevel=2)
                break
    if stats.bound_violations:
        log.warning("thinning bound exceeded %d times", stats.bound_violations)
    times = buf_t[n_prior:n].copy()
    marks = buf_m[n_prior:n].copy()
    horizon = float(np.nextafter(times[-1], np.inf)) if stats.truncated else T
    seq = make_sequence(times, marks, horizon=horizon, num_marks=M, mark_labels=mark_labels)
    if config.start or n_prior:
        seq = seq.replace(start=config.start, history_times=prior_t, history_marks=prior_m)
    return (seq, stats) if return_stats else seq


def sidecar(model: PointProcessModel, config: SimConfig, stats: SimStats) -> dict:
    return {"generator": model.to_dict(), "rng": RNG_NAME, "config": asdict(config), "stats": asdict(stats)}


def write_simulation(seq: EventSequence, path, model, config, stats) -> str:
    """Write events CSV plus a ``.json`` sidecar next to it; returns the sidecar path."""
    save_events(seq, path, "csv")
    side = str(path) + ".json"
    with open(side, "w") as fh:
        json.dump(sidecar(model, config, stats), fh, indent=2, sort_keys=True)
    return side


__all__ = ["SimConfig", "SimStats", "inject_dynamics", "make_rng", "sidecar", "thinning_simulate",
           "write_simulation"]
