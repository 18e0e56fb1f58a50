"""Fixed-length sliding windows with look-ahead labels."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import AlignedLog, Window, WindowSpec
from .errors import ChannelMismatch, LogTooShort


def window_starts(n_samples: int, spec: WindowSpec) -> np.ndarray:
    if n_samples < spec.length:
        return np.zeros(0, dtype=np.int64)
    return np.arange(0, n_samples - spec.length + 1, spec.stride, dtype=np.int64)


def window_labels(log: AlignedLog, starts: np.ndarray, spec: WindowSpec):
    """Label and family per window start.

    The labeling span is ``[a, min(a + L + H, T) - 1]``; the family is the
    anomaly type of the first anomalous sample in that span.
    """
    y = np.asarray(log.labels, dtype=np.int64)
    T = len(y)
    csum = np.concatenate(([0], np.cumsum(y)))
    ends = np.minimum(starts + spec.span, T)
    labels = (csum[ends] - csum[starts] > 0).astype(np.int8)
    pos = np.flatnonzero(y == 1)
    families = []
    for a, e, lab in zip(starts, ends, labels):
        if not lab:
            families.append(None)
            continue
        first = pos[np.searchsorted(pos, a)]
        families.append(log.anomaly_types[first])
    return labels, families


@dataclass(eq=False)
class WindowSet:
    """Windows over one or more logs, ordered by (log_id, start).

    Windows are stored as index arrays into ``logs``; ``values(i)`` returns
    the L x d view on demand.
    """

    spec: WindowSpec
    logs: dict
    log_ids: np.ndarray
    starts: np.ndarray
    labels: np.ndarray
    families: list

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.labels))

    @property
    def channels(self) -> tuple:
        first = next(iter(self.logs.values()))
        return first.channels

    @property
    def ordinals(self) -> np.ndarray:
        return self.starts // self.spec.stride

    def values(self, i: int) -> np.ndarray:
        log = self.logs[self.log_ids[i]]
        a = int(self.starts[i])
        return log.data[a:a + self.spec.length]

    def __iter__(self) -> Iterator[Window]:
        for i in range(len(self)):
            yield Window(str(self.log_ids[i]), int(self.starts[i]), self.values(i),
                         int(self.labels[i]), self.families[i])

    def subset(self, mask) -> "WindowSet":
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return WindowSet(self.spec, self.logs, self.log_ids[idx], self.starts[idx],
                         self.labels[idx], [self.families[i] for i in idx])

    def with_logs(self, logs: dict) -> "WindowSet":
        """Same windows over replacement logs (e.g. standardized copies)."""
        return WindowSet(self.spec, logs, self.log_ids, self.starts, self.labels,
                         self.families)

    def dump_index(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["log_id", "start", "label", "family"])
            for lid, a, y, f in zip(self.log_ids, self.starts, self.labels, self.families):
                w.writerow([lid, int(a), int(y), f or ""])


def make_windows(log: AlignedLog, spec: WindowSpec = WindowSpec()) -> WindowSet:
    if log.n_samples < spec.length:
        raise LogTooShort(f"{log.log_id}: T={log.n_samples} < L={spec.length}")
    starts = window_starts(log.n_samples, spec)
    labels, families = window_labels(log, starts, spec)
    ids = np.full(len(starts), log.log_id, dtype=object)
    return WindowSet(spec, {log.log_id: log}, ids, starts, labels, families)


def make_window_set(logs: Sequence[AlignedLog], spec: WindowSpec = WindowSpec()) -> WindowSet:
    """Window every log; logs shorter than L are an error, not silently skipped."""
    logs = sorted(logs, key=lambda g: g.log_id)
    if len({g.channels for g in logs}) > 1:
        raise ChannelMismatch("logs do not share one channel list")
    parts = [make_windows(g, spec) for g in logs]
    return WindowSet(
        spec,
        {g.log_id: g for g in logs},
        np.concatenate([p.log_ids for p in parts]) if parts else np.zeros(0, dtype=object),
        np.concatenate([p.starts for p in parts]) if parts else np.zeros(0, dtype=np.int64),
        np.concatenate([p.labels for p in parts]) if parts else np.zeros(0, dtype=np.int8),
        [f for p in parts for f in p.families],
    )
