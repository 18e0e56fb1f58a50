"""Leakage-aware train/valid/test assignment of windows.

Three protocols: per-log chronological, chronological with an embargo purge
around both partition boundaries, and whole-log assignment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigInvalid, TooFewLogs
from .windowing import WindowSet

PARTITIONS = ("train", "valid", "test")
PROTOCOLS = ("chronological", "purged_chronological", "leave_log_out")
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)


@dataclass(eq=False)
class SplitAssignment:
    protocol: str
    partition: np.ndarray  # one of train/valid/test/purged per window
    fractions: tuple = DEFAULT_FRACTIONS
    seed: Optional[int] = None
    embargo: int = 0
    boundaries: list = field(default_factory=list)  # (log_id, boundary sample)

    def mask(self, name: str) -> np.ndarray:
        return self.partition == name

    def counts(self) -> dict:
        return {p: int(np.sum(self.partition == p)) for p in PARTITIONS + ("purged",)}


def _check_fractions(fractions):
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ConfigInvalid(f"split fractions must be three non-negative numbers summing "
                            f"to 1, got {fractions}", "split.fractions")


def _log_slices(ws: WindowSet):
    ids = ws.log_ids
    bounds = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1], True])
    return list(zip(bounds[:-1], bounds[1:]))


def chronological_counts(n: int, fractions=DEFAULT_FRACTIONS):
    """(train, valid, test) sizes: floor for train and valid, remainder to test."""
    n_train = math.floor(fractions[0] * n + 1e-9)
    n_valid = math.floor(fractions[1] * n + 1e-9)
    return n_train, n_valid, n - n_train - n_valid


def split_chronological(ws: WindowSet, fractions=DEFAULT_FRACTIONS) -> SplitAssignment:
    _check_fractions(fractions)
    part = np.empty(len(ws), dtype=object)
    for lo, hi in _log_slices(ws):
        n_train, n_valid, _ = chronological_counts(hi - lo, fractions)
        part[lo:hi] = "test"
        part[lo:lo + n_train] = "train"
        part[lo + n_train:lo + n_train + n_valid] = "valid"
    return SplitAssignment("chronological", part, tuple(fractions))


def split_purged(ws: WindowSet, fractions=DEFAULT_FRACTIONS,
                 embargo: Optional[int] = None) -> SplitAssignment:
    """Chronological split, then drop every window whose ``[a, a + L + H)``
    span touches ``[b - embargo, b + embargo)`` for a partition boundary ``b``.

    ``b`` is the first sample of the first window of the later partition.
    Purged windows are never reassigned, so a narrow partition may vanish.
    """
    embargo = ws.spec.span if embargo is None else int(embargo)
    if embargo < 0:
        raise ConfigInvalid("embargo must be >= 0", "split.embargo")
    base = split_chronological(ws, fractions)
    part = base.partition.copy()
    span = ws.spec.span
    boundaries = []
    for lo, hi in _log_slices(ws):
        seq = base.partition[lo:hi]
        starts = ws.starts[lo:hi]
        changes = np.flatnonzero(seq[1:] != seq[:-1]) + 1
        for k in changes:
            b = int(starts[k])
            boundaries.append((ws.log_ids[lo], b))
            if embargo == 0:
                continue  # the zone [b, b) is empty
            hit = (starts < b + embargo) & (starts + span > b - embargo)
            part[lo:hi][hit] = "purged"
    return SplitAssignment("purged_chronological", part, tuple(fractions), None, embargo,
                           boundaries)


def _closest_cut(cum, target, lo, hi):
    """Smallest k in [lo, hi] minimizing |cum[k] - target|."""
    ks = np.arange(lo, hi + 1)
    err = np.abs(cum[ks] - target)
    return int(ks[np.argmin(err)])


def split_leave_log_out(ws: WindowSet, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> SplitAssignment:
    """Whole logs to partitions after a seeded shuffle of log ids.

    Cut points sit where the cumulative window share is closest to the train
    and train+valid targets; every partition gets at least one log.
    """
    _check_fractions(fractions)
    slices = _log_slices(ws)
    if len(slices) < 3:
        raise TooFewLogs(f"leave-log-out needs >= 3 logs, got {len(slices)}")
    ids = [ws.log_ids[lo] for lo, _ in slices]
    sizes = {ws.log_ids[lo]: hi - lo for lo, hi in slices}
    order = [ids[i] for i in np.random.default_rng(seed).permutation(len(ids))]
    total = float(sum(sizes.values()))
    cum = np.r_[0.0, np.cumsum([sizes[i] for i in order])] / total  # cum[k]: first k logs
    n = len(order)
    k1 = _closest_cut(cum, fractions[0], 1, n - 2)
    k2 = _closest_cut(cum, fractions[0] + fractions[1], k1 + 1, n - 1)
    owner = {}
    for k, lid in enumerate(order):
        owner[lid] = "train" if k < k1 else "valid" if k < k2 else "test"
    part = np.array([owner[lid] for lid in ws.log_ids], dtype=object)
    return SplitAssignment("leave_log_out", part, tuple(fractions), seed)


def make_split(ws: WindowSet, protocol: str, seed: int = 0,
               fractions=DEFAULT_FRACTIONS, embargo: Optional[int] = None) -> SplitAssignment:
    if protocol == "chronological":
        return split_chronological(ws, fractions)
    if protocol == "purged_chronological":
        return split_purged(ws, fractions, embargo)
    if protocol == "leave_log_out":
        return split_leave_log_out(ws, fractions, seed)
    raise ConfigInvalid(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}",
                        "protocol")
