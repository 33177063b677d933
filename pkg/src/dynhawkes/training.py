"""Maximum-likelihood fitting with ADAM, early stopping and a hyperparameter grid sweep."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .events import EventSequence
from .kernels import KernelSpec
from .models import DhpModel, ModelError, PointProcessModel, initial_guess

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.002
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("ADAM decay rates must lie in [0, 1)")


class Adam:
    """ADAM on a dict of parameter arrays, updated in place."""

    def __init__(self, params: dict, lr=0.002, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v, dtype=float) for k, v in params.items()}
        self.v = {k: np.zeros_like(v, dtype=float) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                continue
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class TrainReport:
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_nll: float = float("inf")
    seconds: float = 0.0
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _per_event(model: PointProcessModel, seq: EventSequence) -> float:
    res = model.nll(seq)
    return res.total / max(res.num_events, 1)


def _summary(model: PointProcessModel) -> dict:
    out = {}
    for name in ("mu", "A", "beta", "rates"):
        if hasattr(model, name):
            out[name] = np.asarray(getattr(model, name)).tolist()
    if isinstance(model, DhpModel) and hasattr(model.dynamics, "mixture_weights"):
        dyn = model.dynamics
        out["pi"] = [dyn.mixture_weights(m).tolist() for m in range(model.num_marks)]
        out["b0"] = [float(dyn.base_slope(m)) for m in range(model.num_marks)]
    return out


def _finite_check(loss, grads, epoch, batch_no, model):
    bad = not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads.values())
    if bad:
        snapshot = {k: np.asarray(v).ravel()[:8].tolist() for k, v in model.parameters().items()}
        raise TrainingError(f"non-finite loss at epoch {epoch}, batch {batch_no}; parameters: {snapshot}")


def fit(model: PointProcessModel, train: EventSequence, val: EventSequence | None = None,
        config: TrainConfig | None = None, progress=None):
    """Fit ``model`` in place and return (best model, report).

    The epoch loss is the exact training NLL: every batch carries its events'
    log-intensities and the compensator slices preceding them, and the tail
    interval rides with the last batch. ``progress`` (a callable taking a dict)
    receives one record per epoch; epoch 0 scores the starting point.
    Validation NLL (per event) drives early stopping; without a validation
    sequence the training NLL is used instead.
    """
    config = config or TrainConfig()
    if len(train) == 0:
        raise TrainingError("empty training data")
    if val is not None and val.num_marks != train.num_marks:
        raise TrainingError("training and validation sequences disagree on the number of marks")
    if model.num_marks != train.num_marks:
        raise TrainingError("model and data disagree on the number of marks")
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.parameters(), config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    scored = np.arange(len(train.history_times), len(train.history_times) + len(train))
    report = TrainReport()
    started = time.perf_counter()

    def score(epoch, train_nll):
        val_nll = _per_event(model, val) if val is not None and len(val) else train_nll
        record = {"epoch": epoch, "train_nll": train_nll, "val_nll": val_nll,
                  "seconds": time.perf_counter() - started}
        report.history.append(record)
        if progress is not None:
            progress(record)
        log.debug(json.dumps(record))
        return val_nll

    best = model.copy()
    report.best_val_nll = score(0, _per_event(model, train))
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(scored) if config.shuffle else scored
        batches = [np.sort(order[i:i + config.batch_size]) for i in range(0, len(order), config.batch_size)]
        for b, batch in enumerate(batches):
            try:
                loss, grads = model.loss_and_grad(train, batch, include_tail=b == len(batches) - 1)
            except (ModelError, FloatingPointError) as exc:
                raise TrainingError(f"epoch {epoch}, batch {b}: {exc}") from exc
            _finite_check(loss, grads, epoch, b, model)
            opt.step(grads)
        val_nll = score(epoch, _per_event(model, train))
        if not np.isfinite(val_nll):
            raise TrainingError(f"non-finite validation NLL at epoch {epoch}")
        if val_nll < report.best_val_nll:
            report.best_val_nll = val_nll
            report.best_epoch = epoch
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    report.seconds = time.perf_counter() - started
    report.parameters = _summary(best)
    return best, report


def template_dhp(train: EventSequence, kernel="pwl", mixtures=3, layers=2, hidden=8, seed=0,
                 per_dimension=False, full_beta=False) -> DhpModel:
    """DHP initialised from data: background at half the empirical rate, network input scaled by the horizon."""
    spec = kernel if isinstance(kernel, KernelSpec) else KernelSpec.parse(kernel)
    guess = initial_guess(train, spec)
    model = DhpModel.init(train.num_marks, spec, mixtures, layers, hidden, t_scale=max(train.horizon, 1e-12),
                          seed=seed, mu=guess["mu"], alpha=guess["alpha"], beta=guess["beta"],
                          full_beta=full_beta, per_dimension=per_dimension)
    return model


def template_model(kind: str, train: EventSequence, kernel="pwl", mixtures=3, layers=2, hidden=8, seed=0,
                   per_dimension=False, full_beta=False) -> PointProcessModel:
    """Untrained model of type ``kind`` with data-driven starting values."""
    from .baselines import HawkesModel, HppModel, RppModel, SelfCorrectingModel

    M = train.num_marks
    span = max(train.horizon - train.start, 1e-12)
    rate = np.maximum(train.counts_per_mark() / span, 1e-3)
    if kind == "dhp":
        return template_dhp(train, kernel, mixtures, layers, hidden, seed, per_dimension, full_beta)
    if kind == "hawkes":
        spec = kernel if isinstance(kernel, KernelSpec) else KernelSpec.parse(kernel)
        g = initial_guess(train, spec)
        return HawkesModel.init(M, spec, mu=g["mu"], alpha=g["alpha"], beta=g["beta"], full_beta=full_beta)
    if kind == "hpp":
        return HppModel.from_rates(rate)
    if kind == "selfcorrecting":
        # corrects over roughly one mean spacing
        return SelfCorrectingModel.from_values(np.log(rate), rate, 1.0 / rate)
    if kind == "rpp":
        return RppModel.from_values(np.full(M, np.log(train.start + span / 2)), np.ones(M))
    raise ValueError(f"unknown model type {kind!r}")


@dataclass
class SweepSpec:
    layers: tuple = (2,)
    mixtures: tuple = (3,)
    kernels: tuple = ("pwl",)
    hidden: int = 8

    def __post_init__(self):
        self.layers = tuple(int(x) for x in self.layers)
        self.mixtures = tuple(int(x) for x in self.mixtures)
        self.kernels = tuple(str(k).lower() for k in self.kernels)
        if not (self.layers and self.mixtures and self.kernels):
            raise ValueError("every sweep choice set must be non-empty")
        if min(self.layers) < 1 or min(self.mixtures) < 1:
            raise ValueError("layer and mixture counts must be >= 1")
        for k in self.kernels:
            KernelSpec.parse(k)

    def cells(self):
        return list(itertools.product(self.kernels, self.mixtures, self.layers))


SWEEP_COLUMNS = ("kernel", "mixtures", "layers", "val_nll", "best_epoch", "error")


def sweep(spec: SweepSpec, train: EventSequence, val: EventSequence, config: TrainConfig | None = None):
    """Train one DHP per grid cell with the shared seed; returns (rows, index of best row or None)."""
    config = config or TrainConfig()
    rows = []
    for kernel, mixtures, layers in spec.cells():
        row = {"kernel": kernel, "mixtures": mixtures, "layers": layers, "val_nll": float("nan"),
               "best_epoch": -1, "seconds": 0.0, "error": ""}
        try:
            model = template_dhp(train, kernel, mixtures, layers, spec.hidden, config.seed)
            _, report = fit(model, train, val, config)
            row.update(val_nll=report.best_val_nll, best_epoch=report.best_epoch, seconds=report.seconds)
        except (TrainingError, ModelError, ValueError) as exc:
            log.warning("sweep cell %s/%d/%d failed: %s", kernel, mixtures, layers, exc)
            row["error"] = str(exc)
        rows.append(row)
    ok = [i for i, r in enumerate(rows) if not r["error"] and np.isfinite(r["val_nll"])]
    best = min(ok, key=lambda i: rows[i]["val_nll"]) if ok else None
    return rows, best


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in SWEEP_COLUMNS})
