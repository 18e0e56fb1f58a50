"""Leaf-wise regression tree on gradient/hessian histograms."""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ._kernels import (build_histograms, find_best_split, predict_binned, soft_threshold,
                       subtract_histograms)


@dataclass(eq=False)
class Tree:
    """Flat node arrays; ``left == -1`` marks a leaf.

    Internal nodes send rows with ``bin <= bin_`` (raw value <= threshold)
    to the left child. ``value`` holds the shrunken log-odds increment of
    leaves and 0 for internal nodes.
    """

    feature: np.ndarray
    bin_: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    gain: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.left < 0))

    def predict_binned(self, binned: np.ndarray) -> np.ndarray:
        return predict_binned(binned, self.feature, self.bin_, self.left, self.right,
                              self.value)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "bin_", "threshold", "left", "right", "value", "count", "gain")}

    @classmethod
    def from_dict(cls, doc) -> "Tree":
        ints = {"feature", "bin_", "left", "right", "count"}
        return cls(**{k: np.asarray(v, dtype=np.int64 if k in ints else float)
                      for k, v in doc.items()})


class HistogramPool:
    """Reusable (n_features, n_bins) histogram triples.

    Fresh large arrays cost a page fault per touched page; recycling them
    across nodes and trees keeps histogram work proportional to the rows.
    """

    def __init__(self):
        self._free = {}

    def take(self, nf, nb):
        stack = self._free.get((nf, nb))
        if stack:
            return stack.pop()
        return (np.empty((nf, nb)), np.empty((nf, nb)), np.empty((nf, nb), dtype=np.int64))

    def give(self, hist):
        if hist is not None:
            self._free.setdefault(hist[0].shape, []).append(hist)


class _Node:
    __slots__ = ("rows", "G", "H", "hist", "split", "id")

    def __init__(self, rows, G, H, hist, node_id):
        self.rows = rows
        self.G = G
        self.H = H
        self.hist = hist
        self.id = node_id
        self.split = None


def grow_tree(binned, g, h, rows, features, n_bins, thresholds, *, max_leaves,
              min_child_samples, l1, l2, learning_rate, pool=None) -> Tree:
    """Grow one tree on ``rows`` (sorted) using candidate ``features`` (sorted).

    The leaf with the largest split gain is expanded next, earliest-created
    first on ties, until ``max_leaves`` leaves exist or no split has positive
    gain. ``n_bins`` is the bin count per global feature index.
    """
    feat_bins = n_bins[features].astype(np.int64)
    width = max(int(feat_bins.max()) if len(feat_bins) else 1, 1)
    min_child = max(int(min_child_samples), 1)
    pool = pool if pool is not None else HistogramPool()

    def histogram(rows_):
        hist = pool.take(len(features), width)
        build_histograms(binned, rows_, features, g, h, *hist)
        return hist

    feature, bin_, thr, left, right, value, count, gain = ([] for _ in range(8))

    def new_node(rows_, hist):
        G, H, C = hist
        node = _Node(rows_, float(g[rows_].sum()), float(h[rows_].sum()), hist, len(left))
        for lst, v in ((feature, -1), (bin_, -1), (thr, 0.0), (left, -1), (right, -1),
                       (value, 0.0), (count, len(rows_)), (gain, 0.0)):
            lst.append(v)
        if len(features):
            best = find_best_split(G, H, C, feat_bins, node.G, node.H, len(rows_),
                                   l1, l2, min_child)
            if best[0] > 0.0:
                node.split = best
        if node.split is None:
            pool.give(node.hist)
            node.hist = None
        return node

    def leaf_value(node):
        if node.H + l2 <= 0.0:
            return 0.0
        return -learning_rate * soft_threshold(node.G, l1) / (node.H + l2)

    root = new_node(rows, histogram(rows))
    heap = []
    leaves = {root.id: root}
    if root.split is not None:
        heapq.heappush(heap, (-root.split[0], root.id))
    n_leaves = 1
    while heap and n_leaves < max_leaves:
        _, nid = heapq.heappop(heap)
        node = leaves.pop(nid)
        split_gain, j, b = node.split
        f = int(features[j])
        go_left = binned[node.rows, f] <= b
        rows_l, rows_r = node.rows[go_left], node.rows[~go_left]
        small, large = (rows_l, rows_r) if len(rows_l) <= len(rows_r) else (rows_r, rows_l)
        h_small = histogram(small)
        subtract_histograms(*node.hist, *h_small)
        h_large = node.hist
        if small is rows_l:
            child_l, child_r = new_node(rows_l, h_small), new_node(rows_r, h_large)
        else:
            child_l, child_r = new_node(rows_l, h_large), new_node(rows_r, h_small)
        feature[nid], bin_[nid], thr[nid] = f, int(b), float(thresholds[f][b])
        left[nid], right[nid], gain[nid] = child_l.id, child_r.id, float(split_gain)
        node.hist = node.rows = None
        for child in (child_l, child_r):
            leaves[child.id] = child
            if child.split is not None:
                heapq.heappush(heap, (-child.split[0], child.id))
        n_leaves += 1

    for nid, node in leaves.items():
        value[nid] = leaf_value(node)
        pool.give(node.hist)
    return Tree(np.array(feature, dtype=np.int64), np.array(bin_, dtype=np.int64),
                np.array(thr, dtype=float), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value, dtype=float),
                np.array(count, dtype=np.int64), np.array(gain, dtype=float))
