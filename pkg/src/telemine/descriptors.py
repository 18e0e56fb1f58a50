"""Per-channel temporal-statistical window descriptors.

Each channel of a window maps to 18 numbers::

    mean, std, min, max, range, q10, q25, q50, q75, q90,
    first, last, drift, diff_mean, diff_std, absdiff_mean, absdiff_max, acf1

Spreads use the population estimator, quantiles interpolate linearly between
order statistics, and ``acf1`` is the ratio of adjacent centered products to
the centered sum of squares with the denominator floored at ``ACF_EPS``.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ChannelMismatch, NonFiniteInput
from .windowing import WindowSet

ACF_EPS = 1e-12
QUANTILES = (0.10, 0.25, 0.50, 0.75, 0.90)

DESCRIPTORS = (
    "mean", "std", "min", "max", "range",
    "q10", "q25", "q50", "q75", "q90",
    "first", "last", "drift",
    "diff_mean", "diff_std", "absdiff_mean", "absdiff_max",
    "acf1",
)
N_DESCRIPTORS = len(DESCRIPTORS)

GROUPS = {
    "moments": ("mean", "std"),
    "extrema_range": ("min", "max", "range"),
    "quantiles": ("q10", "q25", "q50", "q75", "q90"),
    "endpoints_drift": ("first", "last", "drift"),
    "dynamics": ("diff_mean", "diff_std", "absdiff_mean", "absdiff_max"),
    "autocorr": ("acf1",),
}
ALL_GROUPS = tuple(GROUPS)
GROUP_OF = {name: g for g, names in GROUPS.items() for name in names}

# named descriptor-group masks used by the ablation grid
ABLATIONS = {
    "full": ALL_GROUPS,
    "moments_only": ("moments",),
    "no_dynamics": tuple(g for g in ALL_GROUPS if g != "dynamics"),
    "no_autocorr": tuple(g for g in ALL_GROUPS if g != "autocorr"),
    "no_quantiles": tuple(g for g in ALL_GROUPS if g != "quantiles"),
    "no_endpoints": tuple(g for g in ALL_GROUPS if g != "endpoints_drift"),
}


def descriptor_indices(groups: Iterable[str]) -> np.ndarray:
    wanted = set(groups)
    unknown = wanted - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown descriptor group(s): {sorted(unknown)}")
    return np.array([i for i, n in enumerate(DESCRIPTORS) if GROUP_OF[n] in wanted])


def describe_batch(w: np.ndarray) -> np.ndarray:
    """Descriptors for a stack of series laid out as (..., L); returns (..., 18).

    Every reduction runs over the contiguous last axis, so a row's result does
    not depend on how many rows are batched with it.
    """
    w = np.ascontiguousarray(w, dtype=float)
    L = w.shape[-1]
    out = np.empty(w.shape[:-1] + (N_DESCRIPTORS,))
    mu = w.mean(axis=-1)
    c = w - mu[..., None]
    ss = (c * c).sum(axis=-1)
    out[..., 0] = mu
    out[..., 1] = np.sqrt(ss / L)
    lo = w.min(axis=-1)
    hi = w.max(axis=-1)
    out[..., 2] = lo
    out[..., 3] = hi
    out[..., 4] = hi - lo
    q = np.quantile(w, QUANTILES, axis=-1, method="linear")
    for k in range(len(QUANTILES)):
        out[..., 5 + k] = q[k]
    out[..., 10] = w[..., 0]
    out[..., 11] = w[..., -1]
    out[..., 12] = w[..., -1] - w[..., 0]
    delta = np.diff(w, axis=-1)
    dmu = delta.mean(axis=-1)
    out[..., 13] = dmu
    dc = delta - dmu[..., None]
    out[..., 14] = np.sqrt((dc * dc).mean(axis=-1))
    ad = np.abs(delta)
    out[..., 15] = ad.mean(axis=-1)
    out[..., 16] = ad.max(axis=-1)
    num = (c[..., :-1] * c[..., 1:]).sum(axis=-1)
    out[..., 17] = num / np.maximum(ss, ACF_EPS)
    flat = hi == lo
    if np.any(flat):
        out[flat, 0] = lo[flat]
        out[flat, 1] = 0.0
        out[flat, 17] = 0.0
    return out


def describe_channel(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("describe_channel needs a 1-D series of length >= 2")
    if not np.all(np.isfinite(w)):
        raise NonFiniteInput("window contains non-finite values")
    return describe_batch(w[None, :])[0]


def _write_npz(path, **arrays) -> None:
    # np.savez stamps members with the current time; pin it so reruns match byte for byte
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)),
                        buf.getvalue())


@dataclass(eq=False)
class FeatureMatrix:
    values: np.ndarray
    columns: list
    channels: list  # source channel per column
    groups: list  # descriptor group per column
    log_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=object))
    starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))

    @property
    def shape(self):
        return self.values.shape

    def select_groups(self, groups: Iterable[str]) -> "FeatureMatrix":
        wanted = set(groups)
        keep = [i for i, g in enumerate(self.groups) if g in wanted]
        return self.select_columns(keep)

    def select_columns(self, keep) -> "FeatureMatrix":
        keep = list(keep)
        return FeatureMatrix(self.values[:, keep], [self.columns[i] for i in keep],
                             [self.channels[i] for i in keep],
                             [self.groups[i] for i in keep],
                             self.log_ids, self.starts, self.labels)

    def rows(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(self.values[idx], self.columns, self.channels, self.groups,
                             self.log_ids[idx], self.starts[idx], self.labels[idx])

    def save(self, path) -> None:
        """``<path>.npz`` holds the arrays, ``<path>.json`` the column metadata."""
        path = Path(path)
        _write_npz(path.with_suffix(".npz"), values=self.values,
                   starts=self.starts, labels=self.labels,
                   log_ids=np.asarray(self.log_ids, dtype=str))
        meta = {"columns": self.columns, "channels": self.channels, "groups": self.groups,
                "n_rows": int(self.values.shape[0])}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        with np.load(path.with_suffix(".npz")) as z:
            return cls(z["values"], meta["columns"], meta["channels"], meta["groups"],
                       z["log_ids"].astype(object), z["starts"], z["labels"])


def featurize(ws: WindowSet, groups: Sequence[str] = ALL_GROUPS,
              chunk_rows: int = 4096) -> FeatureMatrix:
    """Descriptor matrix with channel-major columns ``<channel>__<descriptor>``."""
    channels = list(ws.channels)
    if any(tuple(g.channels) != tuple(channels) for g in ws.logs.values()):
        raise ChannelMismatch("window set mixes channel lists")
    sel = descriptor_indices(groups)
    d, L = len(channels), ws.spec.length
    out = np.empty((len(ws), d * len(sel)))

    # rows of one log are contiguous in a WindowSet; walk them log by log
    order = np.arange(len(ws))
    bounds = np.flatnonzero(np.r_[True, ws.log_ids[1:] != ws.log_ids[:-1], True])
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        data = np.asarray(ws.logs[ws.log_ids[lo]].data)
        if not np.all(np.isfinite(data)):
            raise NonFiniteInput(f"{ws.log_ids[lo]}: non-finite values in aligned data")
        view = np.lib.stride_tricks.sliding_window_view(data, L, axis=0)  # (T-L+1, d, L)
        for c0 in range(lo, hi, chunk_rows):
            rows = order[c0:min(c0 + chunk_rows, hi)]
            desc = describe_batch(view[ws.starts[rows]])  # (n, d, 18)
            out[rows] = desc[:, :, sel].reshape(len(rows), -1)

    names = [DESCRIPTORS[i] for i in sel]
    return FeatureMatrix(
        out,
        [f"{c}__{n}" for c in channels for n in names],
        [c for c in channels for _ in names],
        [GROUP_OF[n] for _ in channels for n in names],
        ws.log_ids.copy(), ws.starts.copy(), ws.labels.copy(),
    )


def moments_only_features(ws: WindowSet) -> FeatureMatrix:
    return featurize(ws, ("moments",))


def feature_width(n_channels: int, groups: Sequence[str] = ALL_GROUPS) -> int:
    return n_channels * len(descriptor_indices(groups))
