"""Class-balanced gradient boosting for binary window labels."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import DegenerateLabels, MissingModel, NoSplits, NonFiniteFeature, WidthMismatch
from ..metrics import average_precision
from .binning import apply_bins, fit_bins
from .tree import HistogramPool, Tree, grow_tree

log = logging.getLogger(__name__)

MODEL_SCHEMA = "telemine.gbdt/1"


@dataclass
class BoostConfig:
    max_trees: int = 1600
    learning_rate: float = 0.025
    max_leaves: int = 64
    min_child_samples: int = 80
    subsample: float = 0.9
    colsample: float = 0.75
    l1: float = 0.2
    l2: float = 8.0
    class_balanced: bool = True
    early_stopping_patience: int = 80
    early_stopping_metric: str = "average_precision"
    histogram_bins: int = 255
    seed: int = 0


@dataclass(eq=False)
class BoostedModel:
    config: BoostConfig
    thresholds: list
    trees: list
    base_score: float
    best_iteration: int
    feature_names: list
    history: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.thresholds)

    @property
    def kept_trees(self) -> list:
        return self.trees[:self.best_iteration]

    def feature_gain(self) -> np.ndarray:
        """Total split gain per feature over the kept trees."""
        total = np.zeros(self.n_features)
        for t in self.kept_trees:
            internal = t.left >= 0
            np.add.at(total, t.feature[internal], t.gain[internal])
        return total

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "kind": "gbdt",
            "config": asdict(self.config),
            "base_score": self.base_score,
            "best_iteration": self.best_iteration,
            "feature_names": list(self.feature_names),
            "bin_thresholds": [t.tolist() for t in self.thresholds],
            "trees": [t.to_dict() for t in self.trees],
            "gain": dict(zip(self.feature_names, self.feature_gain().tolist())),
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, doc) -> "BoostedModel":
        if doc.get("schema") != MODEL_SCHEMA:
            raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
        return cls(BoostConfig(**doc["config"]),
                   [np.asarray(t, dtype=float) for t in doc["bin_thresholds"]],
                   [Tree.from_dict(t) for t in doc["trees"]], doc["base_score"],
                   doc["best_iteration"], doc["feature_names"], doc.get("history", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "BoostedModel":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except FileNotFoundError as exc:
            raise MissingModel(f"no model file at {path}") from exc


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def class_weights(y: np.ndarray, balanced: bool = True) -> np.ndarray:
    """w_pos = N / (2 N_pos), w_neg = N / (2 N_neg); unit weights if not balanced."""
    y = np.asarray(y)
    n, n_pos = len(y), int(y.sum())
    if not balanced:
        return np.ones(n)
    return np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * (n - n_pos)))


def weighted_logloss(raw: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    # log(1 + e^-z) for positives, log(1 + e^z) for negatives
    z = np.where(y == 1, -raw, raw)
    return float(np.sum(w * np.logaddexp(0.0, z)) / np.sum(w))


def _check_xy(X, y, name):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int8)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError(f"{name}: X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature(f"{name}: non-finite feature values")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise DegenerateLabels(f"{name}: needs both positive and negative rows")
    return X, y


def fit(X_train, y_train, X_valid, y_valid, cfg: BoostConfig = BoostConfig(),
        feature_names: Optional[Sequence[str]] = None, record_loss: bool = True) -> BoostedModel:
    """Boost trees on the weighted logistic loss with validation-AP early stopping.

    Round 0 is the constant base score; ``best_iteration`` is the number of
    trees (0..max_trees) at which validation AP first peaked.
    """
    X_train, y_train = _check_xy(X_train, y_train, "train")
    X_valid, y_valid = _check_xy(X_valid, y_valid, "valid")
    if X_valid.shape[1] != X_train.shape[1]:
        raise WidthMismatch("train and valid feature widths differ")
    n, F = X_train.shape
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(F)]

    thresholds = fit_bins(X_train, cfg.histogram_bins)
    n_bins = np.array([len(t) + 1 for t in thresholds], dtype=np.int64)
    B_train = apply_bins(X_train, thresholds)
    B_valid = apply_bins(X_valid, thresholds)

    w = class_weights(y_train, cfg.class_balanced)
    w_pos = float(np.sum(w[y_train == 1]))
    base = float(np.log(w_pos / float(np.sum(w[y_train == 0]))))

    raw_train = np.full(n, base)
    raw_valid = np.full(len(y_valid), base)
    rng = np.random.default_rng(cfg.seed)
    n_rows = max(1, int(round(cfg.subsample * n)))
    n_cols = max(1, int(round(cfg.colsample * F)))
    candidates = np.flatnonzero(n_bins > 1)

    ap = [average_precision(raw_valid, y_valid)]
    losses = [weighted_logloss(raw_train, y_train, w)] if record_loss else []
    best_ap, best_it = ap[0], 0
    trees = []
    pool = HistogramPool()
    for it in range(1, cfg.max_trees + 1):
        p = sigmoid(raw_train)
        g = w * (p - y_train)
        h = w * p * (1.0 - p)
        rows = np.sort(rng.permutation(n)[:n_rows]) if n_rows < n else np.arange(n)
        cols = np.sort(rng.permutation(F)[:n_cols]) if n_cols < F else np.arange(F)
        cols = cols[np.isin(cols, candidates)].astype(np.int64)
        tree = grow_tree(B_train, g, h, rows.astype(np.int64), cols, n_bins, thresholds,
                         max_leaves=cfg.max_leaves, min_child_samples=cfg.min_child_samples,
                         l1=cfg.l1, l2=cfg.l2, learning_rate=cfg.learning_rate, pool=pool)
        trees.append(tree)
        raw_train += tree.predict_binned(B_train)
        raw_valid += tree.predict_binned(B_valid)
        ap.append(average_precision(raw_valid, y_valid))
        if record_loss:
            losses.append(weighted_logloss(raw_train, y_train, w))
        if ap[-1] > best_ap:
            best_ap, best_it = ap[-1], it
        elif it - best_it >= cfg.early_stopping_patience:
            break
    log.debug("boosting stopped after %d trees, best %d (AP %.4f)", len(trees), best_it, best_ap)
    history = {"valid_ap": ap, "train_loss": losses}
    return BoostedModel(cfg, thresholds, trees, base, best_it, names, history)


def raw_scores(model: BoostedModel, X, n_trees: Optional[int] = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise WidthMismatch(f"expected {model.n_features} features, got {X.shape[-1]}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("non-finite feature values")
    trees = model.kept_trees if n_trees is None else model.trees[:n_trees]
    out = np.full(X.shape[0], model.base_score)
    if trees:
        B = apply_bins(X, model.thresholds)
        for t in trees:
            out += t.predict_binned(B)
    return out


def predict_scores(model: BoostedModel, X) -> np.ndarray:
    """Positive-class scores in [0, 1]; a ranking score, not a calibrated posterior."""
    return sigmoid(raw_scores(model, X))


def feature_gain_shares(model: BoostedModel, grouping: Mapping[str, str]) -> dict:
    """Fraction of total split gain per family; columns missing from
    ``grouping`` fall under ``"other"``."""
    gains = model.feature_gain()
    total = float(gains.sum())
    if total <= 0:
        raise NoSplits("model has no splits with positive gain")
    shares: dict = {}
    for name, gval in zip(model.feature_names, gains):
        fam = grouping.get(name, "other")
        shares[fam] = shares.get(fam, 0.0) + float(gval)
    return {k: v / total for k, v in sorted(shares.items())}


def average_shares(per_run: Sequence[Mapping[str, float]]) -> dict:
    """Mean of already-normalized share tables; absent families count as 0."""
    fams = sorted({f for run in per_run for f in run})
    return {f: float(np.mean([run.get(f, 0.0) for run in per_run])) for f in fams}
