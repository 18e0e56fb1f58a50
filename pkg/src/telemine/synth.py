"""Deterministic synthetic flight logs with injected anomaly intervals.

Each channel is an AR(1) process whose coefficient and offset are fixed per
channel for the whole dataset. Anomalies touch only the first
``affected_channels`` channels, so importance reports have a known answer.

Families:
    level_shift     additive step on one channel
    drift           linear ramp on one channel
    volatility      innovation scale multiplied inside the interval
    autocorr_break  AR coefficient sign flipped inside the interval
    multi_channel   common additive step on three channels
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Interval, RawLog, write_raw_csv
from .errors import ConfigInvalid

FAMILIES = ("level_shift", "drift", "volatility", "autocorr_break", "multi_channel")


@dataclass
class SynthConfig:
    seed: int = 0
    log_count: int = 20
    samples_per_log: int = 3000
    channels: int = 12
    anomaly_rate: float = 0.02
    family_mix: dict = field(default_factory=lambda: {f: 1.0 for f in FAMILIES})
    interval_length: tuple = (15, 45)
    ar_coef: tuple = (0.5, 0.9)
    noise_scale: float = 1.0
    magnitude: float = 1.0
    volatility_factor: float = 3.0
    affected_channels: Optional[int] = None  # default: half the channels
    missing_rate: float = 0.0
    rate_hz: float = 10.0

    def validate(self) -> None:
        for name in ("anomaly_rate", "missing_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigInvalid(f"must lie in [0, 1], got {v}", f"synth.{name}")
        if self.channels < 2:
            raise ConfigInvalid("need at least 2 channels", "synth.channels")
        if self.log_count < 1 or self.samples_per_log < 2:
            raise ConfigInvalid("need >= 1 log of >= 2 samples", "synth.samples_per_log")
        lo, hi = self.interval_length
        if not 1 <= lo <= hi:
            raise ConfigInvalid(f"bad range {self.interval_length}", "synth.interval_length")
        a, b = self.ar_coef
        if not -1 < a <= b < 1:
            raise ConfigInvalid(f"AR coefficients must lie in (-1, 1), got {self.ar_coef}",
                                "synth.ar_coef")
        unknown = set(self.family_mix) - set(FAMILIES)
        if unknown:
            raise ConfigInvalid(f"unknown families {sorted(unknown)}", "synth.family_mix")
        if any(w < 0 for w in self.family_mix.values()) or sum(self.family_mix.values()) <= 0:
            raise ConfigInvalid("weights must be non-negative with a positive sum",
                                "synth.family_mix")
        if self.noise_scale <= 0 or self.rate_hz <= 0:
            raise ConfigInvalid("noise_scale and rate_hz must be positive", "synth")

    @property
    def n_affected(self) -> int:
        if self.affected_channels is None:
            return max(self.channels // 2, min(3, self.channels))
        return min(max(int(self.affected_channels), 1), self.channels)


@dataclass
class SynthLog:
    raw: RawLog
    intervals: list  # Interval(start, end inclusive, family)
    affected: list  # channel indices touched per interval


def channel_names(d: int) -> list:
    return [f"ch{j:02d}" for j in range(d)]


def _channel_params(cfg: SynthConfig):
    rng = np.random.default_rng([cfg.seed, 0xC4A7])
    phi = rng.uniform(cfg.ar_coef[0], cfg.ar_coef[1], cfg.channels)
    offset = rng.normal(0.0, 2.0, cfg.channels)
    return phi, offset


def _place_intervals(rng, cfg: SynthConfig):
    T = cfg.samples_per_log
    lo, hi = cfg.interval_length
    mean_len = (lo + hi) / 2.0
    target = cfg.anomaly_rate * T
    n = int(np.floor(target / mean_len + rng.uniform()))
    taken = np.zeros(T + 2, dtype=bool)  # padded: neighbours must stay free
    out = []
    for _ in range(n):
        for _attempt in range(100):
            length = int(rng.integers(lo, hi + 1))
            if length > T:
                break
            s = int(rng.integers(0, T - length + 1))
            if not taken[s:s + length + 2].any():
                taken[s + 1:s + length + 1] = True
                out.append((s, s + length - 1))
                break
    return sorted(out)


def _generate_one(cfg: SynthConfig, index: int, phi_c, offset_c) -> SynthLog:
    rng = np.random.default_rng([cfg.seed, index])
    T, d = cfg.samples_per_log, cfg.channels
    fams = [f for f in FAMILIES if cfg.family_mix.get(f, 0) > 0]
    weights = np.array([cfg.family_mix[f] for f in fams], dtype=float)
    weights /= weights.sum()

    spans = _place_intervals(rng, cfg)
    phi = np.tile(phi_c, (T, 1))
    sigma = np.full((T, d), cfg.noise_scale)
    additive = np.zeros((T, d))
    stat_std = cfg.noise_scale / np.sqrt(1.0 - phi_c ** 2)
    intervals, affected = [], []
    n_aff = cfg.n_affected
    for s, e in spans:
        fam = fams[int(rng.choice(len(fams), p=weights))]
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        if fam == "multi_channel":
            chans = sorted(rng.choice(n_aff, size=min(3, n_aff), replace=False).tolist())
        else:
            chans = [int(rng.integers(0, n_aff))]
        length = e - s + 1
        for c in chans:
            amp = cfg.magnitude * stat_std[c] * sign
            if fam == "level_shift":
                additive[s:e + 1, c] += amp
            elif fam == "drift":
                additive[s:e + 1, c] += np.linspace(0.0, 2.0 * amp, length)
            elif fam == "volatility":
                sigma[s:e + 1, c] *= cfg.volatility_factor
            elif fam == "autocorr_break":
                phi[s:e + 1, c] = -phi_c[c]
            else:
                additive[s:e + 1, c] += 0.7 * amp
        intervals.append(Interval(s, e, fam))
        affected.append(chans)

    eps = rng.standard_normal((T, d))
    x = np.empty((T, d))
    x[0] = eps[0] * stat_std
    for t in range(1, T):
        x[t] = phi[t] * x[t - 1] + sigma[t] * eps[t]
    values = x + additive + offset_c

    if cfg.missing_rate > 0:
        values[rng.uniform(size=(T, d)) < cfg.missing_rate] = np.nan

    labels = np.zeros(T, dtype=np.int8)
    types: list = [None] * T
    for s, e, fam in intervals:
        labels[s:e + 1] = 1
        types[s:e + 1] = [fam] * (e - s + 1)
    times = np.arange(T) / cfg.rate_hz
    raw = RawLog(f"synth_{index:04d}", times, channel_names(d), values, labels, types)
    return SynthLog(raw, intervals, affected)


def generate(cfg: SynthConfig) -> list:
    """One SynthLog per log; log ``i`` depends only on (seed, i)."""
    cfg.validate()
    phi_c, offset_c = _channel_params(cfg)
    return [_generate_one(cfg, i, phi_c, offset_c) for i in range(cfg.log_count)]


def write_dataset(logs: list, out_dir) -> list:
    """Raw CSVs plus ``<log_id>.truth.json`` with the injected intervals."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for sl in logs:
        path = out_dir / f"{sl.raw.log_id}.csv"
        write_raw_csv(sl.raw, path)
        truth = {"log_id": sl.raw.log_id,
                 "intervals": [{"start": iv.start, "end": iv.end, "family": iv.family,
                                "channels": [sl.raw.channels[c] for c in chans]}
                               for iv, chans in zip(sl.intervals, sl.affected)]}
        (out_dir / f"{sl.raw.log_id}.truth.json").write_text(json.dumps(truth, indent=1) + "\n")
        paths.append(path)
    return paths


def channel_family_map(cfg: SynthConfig) -> dict:
    """Channel -> "causal" for channels that can carry anomalies, else "nuisance"."""
    names = channel_names(cfg.channels)
    return {c: ("causal" if j < cfg.n_affected else "nuisance") for j, c in enumerate(names)}


def config_dict(cfg: SynthConfig) -> dict:
    doc = asdict(cfg)
    doc["interval_length"] = list(cfg.interval_length)
    doc["ar_coef"] = list(cfg.ar_coef)
    return doc
