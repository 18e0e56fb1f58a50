"""Experiment configuration: TOML file -> typed dataclasses.

Sections map one-to-one onto dataclasses; unknown keys and wrong types are
rejected with the dotted path of the offending field.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import SgdConfig
from .core import WindowSpec
from .descriptors import ABLATIONS, ALL_GROUPS, GROUPS
from .errors import ConfigError, TelemineError
from .gbdt import BoostConfig
from .splits import DEFAULT_FRACTIONS, PROTOCOLS
from .synth import SynthConfig

METHODS = ("tsboost", "moments_only", "pca", "linear_sgd")


@dataclass
class RunConfig:
    out: str = "runs/default"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    protocols: list = field(default_factory=lambda: ["chronological"])
    methods: list = field(default_factory=lambda: list(METHODS))
    workers: int = 1


@dataclass
class DataConfig:
    raw_dir: Optional[str] = None
    rate_hz: float = 10.0
    coverage: float = 0.60


@dataclass
class WindowConfig:
    length: int = 96
    stride: int = 8
    horizon: int = 12

    def spec(self) -> WindowSpec:
        return WindowSpec(self.length, self.stride, self.horizon)


@dataclass
class SplitConfig:
    fractions: list = field(default_factory=lambda: list(DEFAULT_FRACTIONS))
    embargo: Optional[int] = None  # default L + H


@dataclass
class FeatureConfig:
    groups: list = field(default_factory=lambda: list(ALL_GROUPS))


@dataclass
class PcaConfig:
    variance_target: float = 0.95


@dataclass
class AblationConfig:
    variants: list = field(default_factory=lambda: list(ABLATIONS))


@dataclass
class ImportanceConfig:
    family_map: Optional[str] = None  # JSON {channel: family} or CSV channel,family


@dataclass
class ExperimentConfig:
    run: RunConfig = field(default_factory=RunConfig)
    data: DataConfig = field(default_factory=DataConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    gbdt: BoostConfig = field(default_factory=BoostConfig)
    sgd: SgdConfig = field(default_factory=SgdConfig)
    pca: PcaConfig = field(default_factory=PcaConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    importance: ImportanceConfig = field(default_factory=ImportanceConfig)
    synth: Optional[SynthConfig] = None

    @property
    def out_dir(self) -> Path:
        return Path(self.run.out)

    @property
    def raw_dir(self) -> Path:
        if self.data.raw_dir:
            return Path(self.data.raw_dir)
        return self.out_dir / "raw"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_SECTIONS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_SECTION_TYPES = {
    "run": RunConfig, "data": DataConfig, "window": WindowConfig, "split": SplitConfig,
    "features": FeatureConfig, "gbdt": BoostConfig, "sgd": SgdConfig, "pca": PcaConfig,
    "ablation": AblationConfig, "importance": ImportanceConfig, "synth": SynthConfig,
}


def _coerce(value, default, path):
    """Check ``value`` against the type of the field default."""
    if default is None:
        return value
    if value is None:
        raise ConfigError("may not be null", path)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if isinstance(default, (list, tuple)):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", path)
        return type(default)(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"expected a table, got {value!r}", path)
        return dict(value)
    return value


def _build(cls, table, section):
    if not isinstance(table, dict):
        raise ConfigError("expected a table", section)
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in table.items():
        path = f"{section}.{key}"
        if key not in known:
            raise ConfigError("unknown key", path)
        kwargs[key] = _coerce(value, getattr(defaults, key), path)
    try:
        return cls(**kwargs)
    except TelemineError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), section) from exc


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    for p in cfg.run.protocols:
        if p not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {p!r}; choose from {PROTOCOLS}", "run.protocols")
    for m in cfg.run.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}", "run.methods")
    if not cfg.run.seeds:
        raise ConfigError("at least one seed is required", "run.seeds")
    if any(isinstance(s, bool) or not isinstance(s, int) for s in cfg.run.seeds):
        raise ConfigError("seeds must be integers", "run.seeds")
    if cfg.run.workers < 1:
        raise ConfigError("must be >= 1", "run.workers")
    for g in cfg.features.groups:
        if g not in GROUPS:
            raise ConfigError(f"unknown descriptor group {g!r}", "features.groups")
    for v in cfg.ablation.variants:
        if v not in ABLATIONS:
            raise ConfigError(f"unknown ablation variant {v!r}; choose from {tuple(ABLATIONS)}",
                              "ablation.variants")
    fr = cfg.split.fractions
    if len(fr) != 3 or abs(sum(fr) - 1.0) > 1e-9 or min(fr) < 0:
        raise ConfigError("three non-negative fractions summing to 1 required", "split.fractions")
    if not 0 < cfg.data.coverage <= 1:
        raise ConfigError("must lie in (0, 1]", "data.coverage")
    if cfg.data.rate_hz <= 0:
        raise ConfigError("must be positive", "data.rate_hz")
    cfg.window.spec()
    if cfg.synth is not None:
        cfg.synth.validate()
    return cfg


def from_dict(doc: dict) -> ExperimentConfig:
    kwargs = {}
    for section, table in doc.items():
        if section not in _SECTIONS:
            raise ConfigError("unknown section", section)
        if section == "synth" and table is None:  # frozen JSON of a config without [synth]
            continue
        if section == "synth" and isinstance(table, dict):
            for key in ("interval_length", "ar_coef"):
                if key in table and (not isinstance(table[key], list) or len(table[key]) != 2):
                    raise ConfigError("expected a two-element list", f"synth.{key}")
        kwargs[section] = _build(_SECTION_TYPES[section], table, section)
    return validate(ExperimentConfig(**kwargs))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc)


def bundled_config_path(name: str = "synthetic20.toml") -> Path:
    return Path(__file__).parent / "configs" / name
