"""Equal-frequency feature binning.

Bin edges depend only on the rank order of the training values, so any
strictly increasing transform of a feature yields the same binned matrix.
"""
import numpy as np

MAX_BINS = 255


def feature_thresholds(x: np.ndarray, max_bins: int = MAX_BINS) -> np.ndarray:
    """Upper edges for one feature; bin k holds values in (edge[k-1], edge[k]].

    With at most ``max_bins`` distinct values each value gets its own bin.
    Otherwise cut points are placed at equal-count positions of the sorted
    sample and snapped to distinct-value boundaries. Edges are midpoints
    between adjacent distinct training values.
    """
    u, counts = np.unique(x, return_counts=True)
    if len(u) <= 1:
        return np.zeros(0)
    if len(u) <= max_bins:
        cut = np.arange(len(u) - 1)
    else:
        cum = np.cumsum(counts)
        targets = np.arange(1, max_bins) * (cum[-1] / max_bins)
        cut = np.unique(np.searchsorted(cum, targets, side="left"))
        cut = cut[cut < len(u) - 1]
    lo, hi = u[cut], u[cut + 1]
    mid = lo + (hi - lo) / 2.0
    # adjacent floats: the midpoint may round onto hi
    return np.where(mid >= hi, lo, mid)


def fit_bins(X: np.ndarray, max_bins: int = MAX_BINS) -> list:
    if max_bins > 256 or max_bins < 2:
        raise ValueError("max_bins must lie in [2, 256]")
    return [feature_thresholds(X[:, j], max_bins) for j in range(X.shape[1])]


def apply_bins(X: np.ndarray, thresholds: list) -> np.ndarray:
    """Bin ids as a Fortran-ordered uint8 matrix (column access is contiguous)."""
    out = np.empty(X.shape, dtype=np.uint8, order="F")
    for j, edges in enumerate(thresholds):
        out[:, j] = np.searchsorted(edges, X[:, j], side="left")
    return out
