from .booster import (
    BoostConfig,
    BoostedModel,
    average_shares,
    class_weights,
    feature_gain_shares,
    fit,
    predict_scores,
    raw_scores,
    sigmoid,
    weighted_logloss,
)
from .tree import Tree

__all__ = [
    "BoostConfig", "BoostedModel", "Tree", "average_shares", "class_weights",
    "feature_gain_shares", "fit", "predict_scores", "raw_scores", "sigmoid",
    "weighted_logloss",
]
