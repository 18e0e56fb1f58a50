"""Shared domain types for aligned flight telemetry.

Aligned-log CSV contract: header ``time,label,anomaly_type,<channel...>``,
time in seconds, missing values as empty fields, UTF-8, LF line endings.
``anomaly_type`` is an open string tag and is left empty on normal rows.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigInvalid, DataError

RESERVED_COLUMNS = ("time", "label", "anomaly_type")


class Interval(NamedTuple):
    start: int
    end: int  # inclusive
    family: Optional[str]


def _frozen(arr: np.ndarray) -> np.ndarray:
    view = np.asarray(arr).view()
    view.flags.writeable = False
    return view


def intervals_from_labels(labels, anomaly_types=None) -> list[Interval]:
    """Maximal runs of ``label == 1`` as inclusive ``(start, end, family)``.

    The family of a run is the anomaly type of its first sample.
    """
    y = np.asarray(labels).astype(np.int8)
    if y.size == 0:
        return []
    padded = np.concatenate(([0], y, [0]))
    edges = np.flatnonzero(np.diff(padded))
    out = []
    for s, e in zip(edges[::2], edges[1::2]):
        fam = anomaly_types[s] if anomaly_types is not None else None
        out.append(Interval(int(s), int(e - 1), fam))
    return out


def labels_from_intervals(intervals: Sequence, length: int) -> np.ndarray:
    y = np.zeros(length, dtype=np.int8)
    for iv in intervals:
        y[iv[0]:iv[1] + 1] = 1
    return y


@dataclass(frozen=True, eq=False)
class RawLog:
    """One flight before alignment: irregular timestamps, per-log channel set.

    ``values`` is n x d with NaN for missing entries.
    """

    log_id: str
    times: np.ndarray
    channels: tuple
    values: np.ndarray
    labels: np.ndarray
    anomaly_types: tuple

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "anomaly_types", tuple(self.anomaly_types))
        object.__setattr__(self, "times", _frozen(np.asarray(self.times, dtype=float)))
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int8)))

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class AlignedLog:
    log_id: str
    channels: tuple
    data: np.ndarray
    labels: np.ndarray
    anomaly_types: tuple = ()
    rate_hz: float = 10.0
    anomaly_intervals: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "data", _frozen(np.asarray(self.data, dtype=float)))
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int8)))
        types = tuple(self.anomaly_types) or (None,) * len(self.labels)
        object.__setattr__(self, "anomaly_types", types)
        if self.anomaly_intervals is None:
            object.__setattr__(self, "anomaly_intervals",
                               tuple(intervals_from_labels(self.labels, types)))
        else:
            object.__setattr__(self, "anomaly_intervals",
                               tuple(Interval(*iv) for iv in self.anomaly_intervals))

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    def replace_data(self, data) -> "AlignedLog":
        return AlignedLog(self.log_id, self.channels, data, self.labels,
                          self.anomaly_types, self.rate_hz, self.anomaly_intervals)


@dataclass(frozen=True)
class WindowSpec:
    length: int = 96
    stride: int = 8
    horizon: int = 12

    def __post_init__(self):
        if self.length < 2:
            raise ConfigInvalid("window length must be >= 2", "window.length")
        if self.stride < 1:
            raise ConfigInvalid("stride must be >= 1", "window.stride")
        if self.horizon < 0:
            raise ConfigInvalid("horizon must be >= 0", "window.horizon")

    @property
    def span(self) -> int:
        """Samples in the labeling span, L + H."""
        return self.length + self.horizon


@dataclass(frozen=True, eq=False)
class Window:
    log_id: str
    start: int
    values: np.ndarray
    label: int
    family: Optional[str]


@dataclass
class LogEntry:
    log_id: str
    path: str
    row_count: int
    usable: bool
    reason: str = ""


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    channels: list = field(default_factory=list)
    coverage_threshold: float = 0.60

    @property
    def usable(self) -> list:
        return [e for e in self.entries if e.usable]

    def to_json(self) -> str:
        doc = {
            "coverage_threshold": self.coverage_threshold,
            "channels": list(self.channels),
            "logs": [vars(e) for e in self.entries],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        return cls([LogEntry(**e) for e in doc["logs"]], doc["channels"],
                   doc["coverage_threshold"])


@dataclass(frozen=True)
class Violation:
    invariant: str
    index: Optional[tuple]
    detail: str = ""


def validate_aligned_log(log: AlignedLog) -> list[Violation]:
    """Check every AlignedLog invariant and return the findings (never raises)."""
    found = []
    data = np.asarray(log.data)
    if data.ndim != 2:
        return [Violation("data shape", None, f"expected 2-D, got {data.ndim}-D")]
    T, d = data.shape
    if len(log.channels) != d:
        found.append(Violation("channel count", None, f"{len(log.channels)} names for {d} columns"))
    if len(set(log.channels)) != len(log.channels):
        found.append(Violation("duplicate channel", None))
    if not log.rate_hz > 0:
        found.append(Violation("rate", None, f"rate_hz={log.rate_hz}"))
    for t, c in np.argwhere(~np.isfinite(data)):
        found.append(Violation("non-finite value", (int(t), int(c))))
    labels = np.asarray(log.labels)
    if labels.shape != (T,):
        found.append(Violation("label length", None, f"{labels.shape} vs T={T}"))
        return found
    for t in np.flatnonzero((labels != 0) & (labels != 1)):
        found.append(Violation("label domain", (int(t),)))
    if len(log.anomaly_types) != T:
        found.append(Violation("anomaly_types length", None))
    runs = [(iv[0], iv[1]) for iv in intervals_from_labels(labels == 1)]
    given = [(int(iv[0]), int(iv[1])) for iv in log.anomaly_intervals]
    for s, e in sorted(set(runs) ^ set(given)):
        found.append(Violation("interval/label mismatch", (s, e)))
    return found


def write_aligned_csv(log: AlignedLog, path) -> None:
    T = log.n_samples
    frame = pd.DataFrame(np.asarray(log.data), columns=list(log.channels))
    frame.insert(0, "anomaly_type", [t if t is not None else "" for t in log.anomaly_types])
    frame.insert(0, "label", np.asarray(log.labels, dtype=int))
    frame.insert(0, "time", np.arange(T) / log.rate_hz)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        frame.to_csv(fh, index=False, lineterminator="\n", na_rep="")


def _read_frame(path) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip",
                        dtype={"anomaly_type": "string"}, keep_default_na=False,
                        na_values=[""])
    missing = [c for c in ("time", "label") if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")
    if "anomaly_type" not in frame.columns:
        frame["anomaly_type"] = pd.array([pd.NA] * len(frame), dtype="string")
    return frame


def _types(col) -> tuple:
    return tuple(None if pd.isna(v) or v == "" else str(v) for v in col)


def read_raw_csv(path, log_id=None) -> RawLog:
    frame = _read_frame(path)
    channels = [c for c in frame.columns if c not in RESERVED_COLUMNS]
    values = frame[channels].apply(pd.to_numeric, errors="coerce").to_numpy(float)
    return RawLog(log_id or Path(path).stem, frame["time"].to_numpy(float), channels,
                  values, frame["label"].fillna(0).to_numpy(np.int8),
                  _types(frame["anomaly_type"]))


def write_raw_csv(raw: RawLog, path) -> None:
    frame = pd.DataFrame(np.asarray(raw.values), columns=list(raw.channels))
    frame.insert(0, "anomaly_type", [t if t is not None else "" for t in raw.anomaly_types])
    frame.insert(0, "label", np.asarray(raw.labels, dtype=int))
    frame.insert(0, "time", np.asarray(raw.times))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        frame.to_csv(fh, index=False, lineterminator="\n", na_rep="")


def read_aligned_csv(path, log_id=None) -> AlignedLog:
    frame = _read_frame(path)
    channels = [c for c in frame.columns if c not in RESERVED_COLUMNS]
    times = frame["time"].to_numpy(float)
    rate = 10.0
    if len(times) > 1:
        rate = round(1.0 / (times[1] - times[0]), 6)
    return AlignedLog(log_id or Path(path).stem, channels,
                      frame[channels].to_numpy(float),
                      frame["label"].to_numpy(np.int8),
                      _types(frame["anomaly_type"]), rate)
