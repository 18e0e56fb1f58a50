"""Numba kernels for histogram construction, split search and traversal."""
import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def build_histograms(binned, rows, features, g, h, G, H, C):
    """Fill preallocated (n_features, n_bins) histograms in place."""
    # one feature per task: every accumulator has a single writer and a fixed
    # row order, so the sums are identical at any thread count
    nf = features.shape[0]
    for j in prange(nf):
        G[j, :] = 0.0
        H[j, :] = 0.0
        C[j, :] = 0
        col = binned[:, features[j]]
        for r in rows:
            b = col[r]
            G[j, b] += g[r]
            H[j, b] += h[r]
            C[j, b] += 1


@njit(cache=True)
def soft_threshold(G, alpha):
    if G > alpha:
        return G - alpha
    if G < -alpha:
        return G + alpha
    return 0.0


@njit(cache=True)
def node_score(G, H, alpha, lam):
    t = soft_threshold(G, alpha)
    if H + lam <= 0.0:
        return 0.0  # saturated rows with no L2 term carry no curvature
    return t * t / (H + lam)


@njit(cache=True)
def find_best_split(G, H, C, n_bins_per_feature, G_tot, H_tot, C_tot,
                    alpha, lam, min_child):
    """Best (gain, feature slot, bin) over a node histogram.

    Ties keep the earliest feature slot, then the lowest bin. Returns gain
    -inf when no admissible split exists.
    """
    parent = node_score(G_tot, H_tot, alpha, lam)
    best_gain = -np.inf
    best_j = -1
    best_b = -1
    for j in range(G.shape[0]):
        GL = 0.0
        HL = 0.0
        CL = 0
        for b in range(n_bins_per_feature[j] - 1):
            GL += G[j, b]
            HL += H[j, b]
            CL += C[j, b]
            CR = C_tot - CL
            if CL < min_child:
                continue
            if CR < min_child:
                break
            gain = 0.5 * (node_score(GL, HL, alpha, lam)
                          + node_score(G_tot - GL, H_tot - HL, alpha, lam) - parent)
            if gain > best_gain:
                best_gain = gain
                best_j = j
                best_b = b
    return best_gain, best_j, best_b


@njit(cache=True)
def predict_binned(binned, feature, bin_, left, right, value):
    n = binned.shape[0]
    out = np.empty(n)
    for i in range(n):
        k = 0
        while left[k] >= 0:
            if binned[i, feature[k]] <= bin_[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = value[k]
    return out


@njit(cache=True)
def subtract_histograms(G, H, C, Gs, Hs, Cs):
    """Parent minus sibling, written over the parent."""
    nf, nb = G.shape
    for j in range(nf):
        for b in range(nb):
            G[j, b] -= Gs[j, b]
            H[j, b] -= Hs[j, b]
            C[j, b] -= Cs[j, b]
