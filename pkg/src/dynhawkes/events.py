"""Marked event sequences: ingestion, validation, chronological splits, count grids."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


class EventDataError(ValueError):
    pass


class Event(NamedTuple):
    time: float
    mark: int


@dataclass(frozen=True)
class EventSequence:
    """Events observed on the window [start, horizon], plus the history before it.

    ``history_times``/``history_marks`` hold events that precede the window;
    they condition intensities but are not scored. A freshly loaded sequence
    has an empty history and ``start = 0``.
    """

    times: np.ndarray
    marks: np.ndarray
    horizon: float
    num_marks: int
    mark_labels: tuple = ()
    time_unit: str = "unit"
    start: float = 0.0
    history_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    history_marks: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).copy()
        marks = np.asarray(self.marks, dtype=np.int64).copy()
        h_times = np.asarray(self.history_times, dtype=float).copy()
        h_marks = np.asarray(self.history_marks, dtype=np.int64).copy()
        for arr in (times, marks, h_times, h_marks):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "history_times", h_times)
        object.__setattr__(self, "history_marks", h_marks)
        labels = tuple(self.mark_labels) or tuple(str(i) for i in range(self.num_marks))
        object.__setattr__(self, "mark_labels", labels)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "start", float(self.start))
        self._validate()

    def _validate(self):
        if self.num_marks < 1:
            raise EventDataError("num_marks must be >= 1")
        if len(self.mark_labels) != self.num_marks:
            raise EventDataError(f"{len(self.mark_labels)} labels for {self.num_marks} marks")
        if len(set(self.mark_labels)) != len(self.mark_labels):
            raise EventDataError("mark labels must be unique")
        if self.times.shape != self.marks.shape or self.history_times.shape != self.history_marks.shape:
            raise EventDataError("times and marks must have equal length")
        for t, m in ((self.times, self.marks), (self.history_times, self.history_marks)):
            if not np.all(np.isfinite(t)):
                raise EventDataError("non-finite time")
            if np.any(t < 0):
                raise EventDataError("negative time")
            if np.any(np.diff(t) < 0):
                raise EventDataError("unsorted input")
            if len(m) and (m.min() < 0 or m.max() >= self.num_marks):
                raise EventDataError("mark index out of range")
        if not self.start <= self.horizon:
            raise EventDataError("window start exceeds horizon")
        if len(self.times):
            if self.times[0] < self.start:
                raise EventDataError("event before window start")
            # a split piece may end on a tied event exactly at its boundary
            if self.times[-1] > self.horizon:
                raise EventDataError("event time exceeds horizon")
        if len(self.history_times) and self.history_times[-1] > self.start:
            raise EventDataError("history event after window start")

    def __len__(self):
        return len(self.times)

    @property
    def events(self) -> list[Event]:
        return [Event(float(t), int(m)) for t, m in zip(self.times, self.marks)]

    @property
    def all_times(self) -> np.ndarray:
        """History followed by window events."""
        return np.concatenate([self.history_times, self.times])

    @property
    def all_marks(self) -> np.ndarray:
        return np.concatenate([self.history_marks, self.marks])

    def counts_per_mark(self) -> np.ndarray:
        return np.bincount(self.marks, minlength=self.num_marks)

    def replace(self, **changes) -> "EventSequence":
        fields = dict(
            times=self.times, marks=self.marks, horizon=self.horizon, num_marks=self.num_marks,
            mark_labels=self.mark_labels, time_unit=self.time_unit, start=self.start,
            history_times=self.history_times, history_marks=self.history_marks,
        )
        fields.update(changes)
        return _make(**fields)

    def window(self, start: float, end: float) -> "EventSequence":
        """Sub-sequence scoring events in [start, end) with everything earlier as history.

        An event exactly at ``end`` is excluded; one exactly at ``start`` is scored.
        """
        if not start <= end:
            raise EventDataError("window start exceeds end")
        all_t, all_m = self.all_times, self.all_marks
        lo = int(np.searchsorted(all_t, start, side="left"))
        hi = int(np.searchsorted(all_t, end, side="left"))
        return _make(
            times=all_t[lo:hi], marks=all_m[lo:hi], horizon=end, num_marks=self.num_marks,
            mark_labels=self.mark_labels, time_unit=self.time_unit, start=start,
            history_times=all_t[:lo], history_marks=all_m[:lo],
        )

    def scaled(self, factor: float) -> "EventSequence":
        """All times multiplied by ``factor``."""
        if not factor > 0:
            raise EventDataError("time scale must be > 0")
        return _make(
            times=self.times * factor, marks=self.marks, horizon=self.horizon * factor,
            num_marks=self.num_marks, mark_labels=self.mark_labels, time_unit=self.time_unit,
            start=self.start * factor, history_times=self.history_times * factor,
            history_marks=self.history_marks,
        )


def _make(**fields) -> EventSequence:
    return EventSequence(**fields)


def _check_open_horizon(times: np.ndarray, horizon: float) -> None:
    if len(times) and not times[-1] < horizon:
        raise EventDataError(f"every event time must be < horizon {horizon}")


def make_sequence(times, marks, horizon=None, num_marks=None, mark_labels=(), time_unit="unit") -> EventSequence:
    """Build a validated sequence; horizon defaults to max time + the smallest positive gap."""
    times = np.asarray(times, dtype=float)
    marks = np.asarray(marks, dtype=np.int64)
    if num_marks is None:
        num_marks = len(mark_labels) if mark_labels else (int(marks.max()) + 1 if len(marks) else 1)
    if horizon is None:
        horizon = _default_horizon(times)
    _check_open_horizon(times, horizon)
    return EventSequence(times, marks, horizon, num_marks, tuple(mark_labels), time_unit)


def _default_horizon(times: np.ndarray) -> float:
    if not len(times):
        return 1.0
    gaps = np.diff(np.unique(times))
    gap = float(gaps.min()) if len(gaps) else 1.0
    last = float(times[-1])
    # a gap far below the last time's resolution would round back onto it
    return max(last + gap, float(np.nextafter(last, np.inf)))


# -- file I/O --------------------------------------------------------------------------


def _parse_time(raw, line: int) -> float:
    try:
        t = float(raw)
    except (TypeError, ValueError):
        raise EventDataError(f"line {line}: malformed time {raw!r}") from None
    if not math.isfinite(t):
        raise EventDataError(f"line {line}: non-finite time {raw!r}")
    return t


def _read_rows(path: Path, fmt: str):
    rows = []
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EventDataError(f"{path}: empty file")
            header = [h.strip() for h in header]
            if "time" not in header or "mark" not in header:
                raise EventDataError(f"{path}: header must contain 'time' and 'mark'")
            it, im = header.index("time"), header.index("mark")
            for line, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise EventDataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
                rows.append((_parse_time(row[it], line), row[im].strip(), line))
    elif fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for line, text in enumerate(fh, start=1):
                if not text.strip():
                    continue
                try:
                    obj = json.loads(text)
                    raw_t, raw_m = obj["time"], obj["mark"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise EventDataError(f"line {line}: malformed row") from None
                rows.append((_parse_time(raw_t, line), str(raw_m), line))
    else:
        raise EventDataError(f"unknown format {fmt!r}")
    if not rows:
        raise EventDataError(f"{path}: empty file")
    return rows


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    return "jsonl" if suffix in (".jsonl", ".ndjson") else "csv"


def load_manifest(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        labels = json.load(fh)
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise EventDataError(f"{path}: manifest must be a JSON array of labels")
    return labels


def save_manifest(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(list(labels), fh)


def load_events(path, fmt: str | None = None, manifest=None, sort: bool = False,
                horizon: float | None = None, time_scale: float = 1.0, time_unit: str = "unit") -> EventSequence:
    """Read a CSV (``time,mark`` header) or JSONL file into an EventSequence.

    Marks are mapped to dense indices by first appearance unless ``manifest``
    (a list of labels, or a path to a JSON array) fixes the map. Times are
    multiplied by ``time_scale`` after reading.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    rows = _read_rows(path, fmt or infer_format(path))
    if isinstance(manifest, (str, Path)):
        manifest = load_manifest(manifest)
    if manifest is not None:
        index = {label: i for i, label in enumerate(manifest)}
        if len(index) != len(manifest):
            raise EventDataError("manifest labels must be unique")
        labels = list(manifest)
    else:
        index, labels = {}, []
    times, marks = [], []
    prev = -math.inf
    for t, label, line in rows:
        if t < 0:
            raise EventDataError(f"line {line}: negative time {t}")
        if t < prev and not sort:
            raise EventDataError(f"line {line}: unsorted input (use sort=True / --sort)")
        prev = max(prev, t)
        if label not in index:
            if manifest is not None:
                raise EventDataError(f"line {line}: mark {label!r} not in manifest")
            index[label] = len(labels)
            labels.append(label)
        times.append(t)
        marks.append(index[label])
    times = np.asarray(times)
    marks = np.asarray(marks, dtype=np.int64)
    if sort:
        order = np.argsort(times, kind="stable")
        times, marks = times[order], marks[order]
    if horizon is None:
        horizon = _default_horizon(times)
    _check_open_horizon(times, horizon)
    seq = EventSequence(times, marks, horizon, len(labels), tuple(labels), time_unit)
    return seq.scaled(time_scale) if time_scale != 1.0 else seq


def _format_time(t: float) -> str:
    return repr(float(t))


def format_events_csv(seq: EventSequence) -> str:
    buf = io.StringIO()
    buf.write("time,mark\n")
    labels = seq.mark_labels
    for t, m in zip(seq.times, seq.marks):
        buf.write(f"{_format_time(t)},{labels[m]}\n")
    return buf.getvalue()


def save_events(seq: EventSequence, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        path.write_text(format_events_csv(seq), encoding="utf-8")
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for t, m in zip(seq.times, seq.marks):
                fh.write(json.dumps({"time": float(t), "mark": seq.mark_labels[m]}) + "\n")
    else:
        raise EventDataError(f"unknown format {fmt!r}")


# -- splitting ------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    val_fraction: float = 0.1
    test_fraction: float = 0.2

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if not all(0 < f < 1 for f in fr):
            raise ValueError(f"split fractions must lie in (0, 1): {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1: {fr}")

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 3:
            raise ValueError("split must have three comma-separated fractions")
        return cls(*parts)


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_train = math.floor(spec.train_fraction * n)
    n_val = math.floor(spec.val_fraction * n)
    return n_train, n_val, n - n_train - n_val


def chronological_split(seq: EventSequence, spec: SplitSpec = SplitSpec()):
    """Partition events in time order into train/val/test pieces.

    Each piece keeps every earlier event as conditioning history. Piece
    boundaries sit at the first event time of the following piece.
    """
    n = len(seq)
    if n == 0:
        raise EventDataError("cannot split an empty sequence")
    sizes = split_sizes(n, spec)
    if min(sizes) == 0:
        raise EventDataError("split produces empty partition")
    n_train, n_val, _ = sizes
    b1 = float(seq.times[n_train])
    b2 = float(seq.times[n_train + n_val])
    bounds = [(seq.start, b1, 0, n_train), (b1, b2, n_train, n_train + n_val), (b2, seq.horizon, n_train + n_val, n)]
    pieces = []
    h_times, h_marks = seq.history_times, seq.history_marks
    for lo_t, hi_t, lo, hi in bounds:
        pieces.append(_make(
            times=seq.times[lo:hi], marks=seq.marks[lo:hi], horizon=hi_t, num_marks=seq.num_marks,
            mark_labels=seq.mark_labels, time_unit=seq.time_unit, start=lo_t,
            history_times=np.concatenate([h_times, seq.times[:lo]]),
            history_marks=np.concatenate([h_marks, seq.marks[:lo]]),
        ))
    return tuple(pieces)


# -- interval counts ----------------------------------------------------------------


@dataclass(frozen=True)
class CountGrid:
    boundaries: np.ndarray
    counts: np.ndarray

    @property
    def num_intervals(self) -> int:
        return len(self.boundaries) - 1


def grid_boundaries(start: float, end: float, width: float) -> np.ndarray:
    if not start < end:
        raise ValueError("start must be < end")
    if not width > 0:
        raise ValueError("width must be > 0")
    s = math.ceil((end - start) / width - 1e-12)
    edges = start + width * np.arange(s + 1, dtype=float)
    edges[-1] = end
    return edges


def count_events(times, marks, boundaries, num_marks: int) -> np.ndarray:
    """Counts per interval (t_s, t_{s+1}] and mark."""
    boundaries = np.asarray(boundaries, dtype=float)
    s = len(boundaries) - 1
    counts = np.zeros((s, num_marks), dtype=np.int64)
    times = np.asarray(times)
    idx = np.searchsorted(boundaries, times, side="left") - 1
    inside = (idx >= 0) & (idx < s)
    np.add.at(counts, (idx[inside], np.asarray(marks)[inside]), 1)
    return counts


def slice_counts(seq: EventSequence, start: float, end: float, width: float) -> CountGrid:
    edges = grid_boundaries(start, end, width)
    counts = count_events(seq.all_times, seq.all_marks, edges, seq.num_marks)
    return CountGrid(edges, counts)
