"""Raw flight tables to clean aligned logs.

Stages: nearest-sample resampling onto a fixed grid, coverage-based channel
selection, deterministic gap repair, and train-only standardization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import AlignedLog, DatasetManifest, LogEntry, RawLog
from .errors import ChannelMismatch, DataError, EmptyLog, NoChannelsRetained

log = logging.getLogger(__name__)

STD_FLOOR = 1e-8
# grid-unit slack so that samples exactly half a step away count as outside
_HALF_STEP = 0.5 - 1e-9


def resample_to_grid(raw: RawLog, rate_hz: float = 10.0) -> AlignedLog:
    """Snap a raw log onto a fixed-rate grid spanning its first to last timestamp.

    A grid point copies the nearest raw row lying strictly within half a grid
    step, otherwise it is missing. A grid point is anomalous when any raw
    anomalous row falls inside its cell.
    """
    if len(raw) < 2:
        raise EmptyLog(f"{raw.log_id}: need at least 2 rows, got {len(raw)}")
    if rate_hz <= 0:
        raise DataError(f"rate_hz must be positive, got {rate_hz}")
    t = np.asarray(raw.times, dtype=float)
    if not np.all(np.diff(t) > 0):
        raise DataError(f"{raw.log_id}: timestamps are not strictly increasing")

    u = (t - t[0]) * rate_hz  # raw positions in grid units
    n_grid = int(np.floor(u[-1] + 1e-9)) + 1
    grid = np.arange(n_grid, dtype=float)

    right = np.clip(np.searchsorted(u, grid, side="left"), 0, len(u) - 1)
    left = np.clip(right - 1, 0, len(u) - 1)
    d_left = np.abs(u[left] - grid)
    d_right = np.abs(u[right] - grid)
    nearest = np.where(d_left <= d_right, left, right)
    hit = np.minimum(d_left, d_right) < _HALF_STEP

    values = np.full((n_grid, len(raw.channels)), np.nan)
    values[hit] = np.asarray(raw.values)[nearest[hit]]

    cell = np.clip(np.floor(u + 0.5).astype(np.int64), 0, n_grid - 1)
    labels = np.zeros(n_grid, dtype=np.int8)
    types: list = [None] * n_grid
    for i in np.flatnonzero(np.asarray(raw.labels) == 1):
        k = cell[i]
        if not labels[k]:
            labels[k] = 1
            types[k] = raw.anomaly_types[i] if raw.anomaly_types else None
    return AlignedLog(raw.log_id, raw.channels, values, labels, tuple(types), rate_hz)


def channel_presence(log_: AlignedLog) -> set:
    present = np.any(np.isfinite(np.asarray(log_.data)), axis=0)
    return {c for c, p in zip(log_.channels, present) if p}


def select_channels(presence: Iterable[set], threshold: float = 0.60) -> list:
    """Channels present in at least ``threshold`` of the usable logs, sorted."""
    presence = list(presence)
    if not presence:
        raise NoChannelsRetained("no usable logs")
    counts: dict = {}
    for chans in presence:
        for c in chans:
            counts[c] = counts.get(c, 0) + 1
    need = threshold * len(presence)
    kept = sorted(c for c, n in counts.items() if n >= need - 1e-9)
    if not kept:
        raise NoChannelsRetained(f"no channel reaches coverage {threshold:.2f}")
    return kept


def conform_channels(log_: AlignedLog, channels: Sequence[str]) -> AlignedLog:
    """Reorder to ``channels``; channels absent from the log become all-missing."""
    index = {c: i for i, c in enumerate(log_.channels)}
    data = np.full((log_.n_samples, len(channels)), np.nan)
    src = np.asarray(log_.data)
    for j, c in enumerate(channels):
        if c in index:
            data[:, j] = src[:, index[c]]
    return AlignedLog(log_.log_id, channels, data, log_.labels, log_.anomaly_types,
                      log_.rate_hz, log_.anomaly_intervals)


def impute_array(data: np.ndarray) -> np.ndarray:
    data = np.array(data, dtype=float)
    idx = np.arange(data.shape[0])
    for j in range(data.shape[1]):
        col = data[:, j]
        ok = np.isfinite(col)
        if ok.all():
            continue
        if not ok.any():
            col[:] = 0.0
            continue
        # np.interp holds the edge values past the first/last observation
        col[~ok] = np.interp(idx[~ok], idx[ok], col[ok])
    data[~np.isfinite(data)] = 0.0
    return data


def impute(log_: AlignedLog) -> AlignedLog:
    """Linear interpolation inside gaps, edge extension at the ends, zeros for
    channels with no finite value at all."""
    return log_.replace_data(impute_array(log_.data))


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    channels: tuple
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"channels": list(self.channels), "mean": self.mean.tolist(),
                "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "StandardizationStats":
        return cls(tuple(doc["channels"]), np.asarray(doc["mean"], dtype=float),
                   np.asarray(doc["std"], dtype=float))


def fit_standardizer(blocks: Sequence[np.ndarray], channels: Sequence[str],
                     floor: float = STD_FLOOR) -> StandardizationStats:
    """Population mean/std over the stacked training samples.

    ``blocks`` are n_i x d arrays in a fixed order; the two-pass reduction runs
    over their concatenation so the result does not depend on how the blocks
    were produced.
    """
    X = np.concatenate([np.asarray(b, dtype=float) for b in blocks], axis=0)
    if X.shape[0] == 0:
        raise DataError("no training samples to fit the standardizer")
    if X.shape[1] != len(channels):
        raise ChannelMismatch(f"{X.shape[1]} columns for {len(channels)} channels")
    mean = X.mean(axis=0)
    # summation rounding can move the mean of a flat channel off its value,
    # which the std floor would then blow up
    flat = X.max(axis=0) == X.min(axis=0)
    mean[flat] = X[0, flat]
    std = np.sqrt(((X - mean) ** 2).mean(axis=0))
    return StandardizationStats(tuple(channels), mean, np.maximum(std, floor))


def apply_standardizer(log_: AlignedLog, stats: StandardizationStats) -> AlignedLog:
    if tuple(log_.channels) != tuple(stats.channels):
        raise ChannelMismatch(f"{log_.log_id}: channel list differs from the fitted stats")
    return log_.replace_data((np.asarray(log_.data) - stats.mean) / stats.std)


def align_dataset(raws: Sequence[RawLog], rate_hz: float = 10.0,
                  coverage: float = 0.60, min_samples: int = 108,
                  paths: Sequence[str] | None = None):
    """Resample, coverage-filter and impute a set of raw logs.

    A log is usable when it resamples cleanly and has at least ``min_samples``
    grid points. Returns ``(manifest, aligned_logs)`` with unusable logs listed
    in the manifest only.
    """
    paths = list(paths) if paths is not None else [""] * len(raws)
    entries, gridded = [], []
    for raw, path in zip(raws, paths):
        try:
            g = resample_to_grid(raw, rate_hz)
        except DataError as exc:
            entries.append(LogEntry(raw.log_id, path, len(raw), False, str(exc)))
            continue
        if g.n_samples < min_samples:
            entries.append(LogEntry(raw.log_id, path, g.n_samples, False,
                                    f"{g.n_samples} aligned rows < {min_samples}"))
            continue
        entries.append(LogEntry(raw.log_id, path, g.n_samples, True))
        gridded.append(g)
    channels = select_channels([channel_presence(g) for g in gridded], coverage)
    log.info("retained %d channels from %d usable logs", len(channels), len(gridded))
    aligned = [impute(conform_channels(g, channels)) for g in gridded]
    return DatasetManifest(entries, channels, coverage), aligned
