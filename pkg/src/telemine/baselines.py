"""Comparators sharing the window feature pipeline.

``PcaDetector`` is unsupervised (reconstruction error off a low-rank
subspace); ``LinearSgdDetector`` is an elastic-net logistic model trained
with per-sample SGD under an inverse-scaling step size.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateData, DegenerateLabels, MissingModel, WidthMismatch
from .gbdt import class_weights, sigmoid
from .metrics import average_precision

SCHEMA = "telemine.baseline/1"
_SCALE_FLOOR = 1e-8


def _load_doc(path, kind):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingModel(f"no model file at {path}") from exc
    if doc.get("schema") != SCHEMA or doc.get("kind") != kind:
        raise ValueError(f"{path} is not a {kind} model")
    return doc


def _dump(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


@dataclass(eq=False)
class PcaDetector:
    mean: np.ndarray
    scale: np.ndarray
    basis: np.ndarray  # k x D, orthonormal rows
    explained: np.ndarray  # variance ratio of every component, descending

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    def to_dict(self):
        return {"schema": SCHEMA, "kind": "pca", "mean": self.mean.tolist(),
                "scale": self.scale.tolist(), "basis": self.basis.tolist(),
                "explained": self.explained.tolist()}

    def save(self, path):
        _dump(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        doc = _load_doc(path, "pca")
        D = len(doc["mean"])
        return cls(np.asarray(doc["mean"]), np.asarray(doc["scale"]),
                   np.asarray(doc["basis"], dtype=float).reshape(-1, D),
                   np.asarray(doc["explained"]))


def pca_fit(X, variance_target: float = 0.95, standardize: bool = True) -> PcaDetector:
    """Keep the fewest leading components explaining >= ``variance_target``."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    scale = np.ones(X.shape[1])
    if standardize:
        std = X.std(axis=0)
        scale = np.where(std > _SCALE_FLOOR, std, 1.0)
    Z = (X - mean) / scale
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    var = s ** 2
    total = var.sum()
    if not total > 0:
        raise DegenerateData("training features have zero variance")
    ratio = var / total
    k = int(np.searchsorted(np.cumsum(ratio), variance_target - 1e-12, side="left")) + 1
    k = min(k, len(ratio))
    return PcaDetector(mean, scale, vt[:k].copy(), ratio)


def pca_score(det: PcaDetector, X) -> np.ndarray:
    """Euclidean norm of the residual off the retained subspace."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != det.mean.shape[0]:
        raise WidthMismatch(f"expected {det.mean.shape[0]} features, got {X.shape[-1]}")
    Z = (X - det.mean) / det.scale
    resid = Z - (Z @ det.basis.T) @ det.basis
    return np.sqrt((resid ** 2).sum(axis=1))


def minmax_normalize(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.zeros_like(s)
    return (s - lo) / (hi - lo)


@dataclass
class SgdConfig:
    epochs: int = 30
    alpha: float = 1e-4  # overall penalty strength
    l1_ratio: float = 0.15
    eta0: float = 0.01
    power_t: float = 0.25
    class_balanced: bool = True
    seed: int = 0


@dataclass(eq=False)
class LinearSgdDetector:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    config: SgdConfig = field(default_factory=SgdConfig)
    best_epoch: int = 0
    history: dict = field(default_factory=dict)

    def to_dict(self):
        return {"schema": SCHEMA, "kind": "linear_sgd", "weights": self.weights.tolist(),
                "bias": self.bias, "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "config": asdict(self.config), "best_epoch": self.best_epoch,
                "history": self.history}

    def save(self, path):
        _dump(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        doc = _load_doc(path, "linear_sgd")
        return cls(np.asarray(doc["weights"], dtype=float), doc["bias"],
                   np.asarray(doc["mean"]), np.asarray(doc["scale"]),
                   SgdConfig(**doc["config"]), doc["best_epoch"], doc.get("history", {}))


def penalty_step(w, eta, alpha, l1_ratio):
    """Elastic-net part of one SGD step: L2 decay then L1 soft threshold."""
    w = w * (1.0 - eta * alpha * (1.0 - l1_ratio))
    return np.sign(w) * np.maximum(np.abs(w) - eta * alpha * l1_ratio, 0.0)


@njit(cache=True)
def _sgd_epoch(Z, y, cw, order, w, b, t0, eta0, power_t, alpha, l1_ratio):
    t = t0
    shrink_l1 = alpha * l1_ratio
    decay_l2 = alpha * (1.0 - l1_ratio)
    D = Z.shape[1]
    for i in order:
        t += 1
        eta = eta0 / t ** power_t
        z = b
        for j in range(D):
            z += w[j] * Z[i, j]
        if z >= 0:
            p = 1.0 / (1.0 + np.exp(-z))
        else:
            ez = np.exp(z)
            p = ez / (1.0 + ez)
        grad = cw[i] * (p - y[i])
        for j in range(D):
            wj = (w[j] - eta * grad * Z[i, j]) * (1.0 - eta * decay_l2)
            cut = eta * shrink_l1
            if wj > cut:
                w[j] = wj - cut
            elif wj < -cut:
                w[j] = wj + cut
            else:
                w[j] = 0.0
        b -= eta * grad
    return b, t


def _standardize(X, mean, scale):
    return (np.asarray(X, dtype=float) - mean) / scale


def sgd_fit(X_train, y_train, X_valid, y_valid, cfg: SgdConfig = SgdConfig()) -> LinearSgdDetector:
    """Seeded epoch-shuffled SGD; the epoch with the best validation AP is kept
    (epoch 0 is the all-zero model)."""
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train).astype(np.float64)
    y_valid = np.asarray(y_valid).astype(np.int8)
    n_pos = int(y_train.sum())
    if n_pos == 0 or n_pos == len(y_train):
        raise DegenerateLabels("train needs both classes")
    if y_valid.min() == y_valid.max():
        raise DegenerateLabels("valid needs both classes")
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    scale = np.where(std > _SCALE_FLOOR, std, 1.0)
    Z = np.ascontiguousarray(_standardize(X_train, mean, scale))
    Zv = _standardize(X_valid, mean, scale)
    cw = class_weights(y_train, cfg.class_balanced)

    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(Z.shape[1])
    b, t = 0.0, 0
    best = (average_precision(np.full(len(y_valid), 0.0), y_valid), 0, w.copy(), b)
    aps = [best[0]]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(y_train)).astype(np.int64)
        b, t = _sgd_epoch(Z, y_train, cw, order, w, b, t, cfg.eta0, cfg.power_t,
                          cfg.alpha, cfg.l1_ratio)
        ap = average_precision(Zv @ w + b, y_valid)
        aps.append(ap)
        if ap > best[0]:
            best = (ap, epoch, w.copy(), b)
    _, epoch, w_best, b_best = best
    return LinearSgdDetector(w_best, float(b_best), mean, scale, cfg, epoch, {"valid_ap": aps})


def sgd_score(model: LinearSgdDetector, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise WidthMismatch(f"expected {model.weights.shape[0]} features, got {X.shape[-1]}")
    return sigmoid(_standardize(X, model.mean, model.scale) @ model.weights + model.bias)
