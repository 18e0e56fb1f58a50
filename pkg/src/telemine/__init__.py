"""Window-level anomaly mining for multivariate flight telemetry.

Raw logs are aligned to a common grid, cut into overlapping windows,
summarized by 18 statistics per channel and scored by a histogram
gradient-boosted tree ensemble. PCA and linear baselines share the same
feature matrix; evaluation is leakage-aware (chronological, purged and
leave-log-out splits).
"""
from .core import AlignedLog, RawLog, WindowSpec
from .descriptors import ABLATIONS, DESCRIPTORS, GROUPS, describe_channel, featurize
from .errors import TelemineError
from .windowing import make_window_set

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS", "AlignedLog", "DESCRIPTORS", "GROUPS", "RawLog", "TelemineError",
    "WindowSpec", "describe_channel", "featurize", "make_window_set", "__version__",
]
