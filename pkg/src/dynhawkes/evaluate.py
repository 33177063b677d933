"""Test-period scoring: held-out NLL, interval-count MAPE and time-rescaling residuals."""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .events import EventSequence, count_events, grid_boundaries
from .models import NllResult, PointProcessModel

log = logging.getLogger(__name__)

DEFAULT_WIDTH_SECONDS = 900.0  # 15 minutes
MIN_RESIDUAL_EVENTS = 10


class EvaluationError(ValueError):
    pass


def test_nll(model: PointProcessModel, seq: EventSequence, start: float, end: float | None = None) -> NllResult:
    """NLL of events in [start, end) conditioned on every earlier event."""
    end = seq.horizon if end is None else end
    if not end > start:
        raise EvaluationError("empty test window")
    return model.nll(seq.window(start, end))


test_nll.__test__ = False  # keep pytest from collecting this as a test


@dataclass
class MapeResult:
    per_dimension: list
    mean: float
    std: float
    excluded: list = field(default_factory=list)
    predicted: list = field(default_factory=list)
    actual: list = field(default_factory=list)


def mape_from_totals(predicted, actual) -> MapeResult:
    """|sum_s predicted - sum_s actual| / sum_s actual per dimension; zero-count dimensions are excluded."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual totals differ in shape")
    per_dim = np.full(len(actual), np.nan)
    keep = actual > 0
    per_dim[keep] = np.abs(predicted[keep] - actual[keep]) / actual[keep]
    excluded = np.flatnonzero(~keep).tolist()
    if excluded:
        warnings.warn(f"dimensions {excluded} have no observed events and are excluded from MAPE", RuntimeWarning,
                      stacklevel=2)
    vals = per_dim[keep]
    mean = float(vals.mean()) if len(vals) else float("nan")
    std = float(vals.std()) if len(vals) else float("nan")
    return MapeResult([None if np.isnan(v) else float(v) for v in per_dim], mean, std, excluded,
                      predicted.tolist(), actual.tolist())


def mape(model: PointProcessModel, seq: EventSequence, start: float, end: float | None = None,
         width: float = DEFAULT_WIDTH_SECONDS) -> MapeResult:
    """MAPE of predicted interval counts over [start, end), rolling on true history at each interval start."""
    end = seq.horizon if end is None else end
    edges = grid_boundaries(start, end, width)
    pred = model.predict_counts(seq, edges)
    actual = count_events(seq.all_times, seq.all_marks, edges, seq.num_marks)
    return mape_from_totals(pred.sum(axis=0), actual.sum(axis=0))


@dataclass
class ResidualResult:
    status: str  # "ok" or "insufficient"
    num_increments: int
    statistic: float | None = None
    pvalue: float | None = None
    pass_1pct: bool | None = None
    pass_5pct: bool | None = None


def rescaled_increments(model: PointProcessModel, seq: EventSequence) -> list:
    """Per dimension, compensator mass between consecutive events of that dimension."""
    comp = model.interval_compensators(seq)[:-1]  # drop the tail interval
    cum = np.cumsum(comp, axis=0)  # cum[i, m] = Lambda_m(start, t_i]
    out = []
    for m in range(seq.num_marks):
        idx = np.flatnonzero(seq.marks == m)
        out.append(np.diff(cum[idx, m]))
    return out


def residual_diagnostics(model: PointProcessModel, seq: EventSequence) -> list:
    """KS test of rescaled inter-event increments against Exp(1), per dimension."""
    results = []
    for incr in rescaled_increments(model, seq):
        if len(incr) + 1 < MIN_RESIDUAL_EVENTS:
            results.append(ResidualResult("insufficient", len(incr)))
            continue
        ks = stats.kstest(incr, "expon")
        results.append(ResidualResult("ok", len(incr), float(ks.statistic), float(ks.pvalue),
                                      bool(ks.pvalue > 0.01), bool(ks.pvalue > 0.05)))
    return results


@dataclass
class EvaluationReport:
    nll: float
    nll_per_event: float
    num_events: int
    mape: float
    mape_std: float
    mape_per_dimension: list
    width: float
    window: tuple
    residuals: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def csv_row(self) -> dict:
        row = {"nll": self.nll, "nll_per_event": self.nll_per_event, "num_events": self.num_events,
               "mape": self.mape, "mape_std": self.mape_std, "width": self.width,
               "start": self.window[0], "end": self.window[1]}
        for m, v in enumerate(self.mape_per_dimension):
            row[f"mape_{m}"] = v
        for m, r in enumerate(self.residuals):
            row[f"ks_{m}"] = r["statistic"] if isinstance(r, dict) else r.statistic
        return row


def evaluate(model: PointProcessModel, seq: EventSequence, start: float, end: float | None = None,
             width: float = DEFAULT_WIDTH_SECONDS, residuals: bool = True) -> EvaluationReport:
    end = seq.horizon if end is None else end
    res = test_nll(model, seq, start, end)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mp = mape(model, seq, start, end, width)
    for w in caught:
        log.warning(str(w.message))
    diag = [asdict(r) for r in residual_diagnostics(model, seq.window(start, end))] if residuals else []
    return EvaluationReport(res.total, res.per_event, res.num_events, mp.mean, mp.std, mp.per_dimension,
                            width, (start, end), diag)
