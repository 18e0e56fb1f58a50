"""Window- and event-level detection metrics.

AUPRC here is step-wise average precision: tied scores form one threshold
block, and precision at each block end is weighted by the recall gained.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import SingleClass


def _check(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise SingleClass("metric needs both classes present")
    return s, y, n_pos


def auroc(scores, labels) -> float:
    """Mann-Whitney U / (n_pos * n_neg); ties count one half."""
    s, y, n_pos = _check(scores, labels)
    n_neg = len(y) - n_pos
    ranks = rankdata(s, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _blocks(s, y):
    """Cumulative (tp, fp) at the end of each descending tied-score block."""
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    ends = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s) - 1]
    tp = np.cumsum(y_sorted)[ends]
    fp = (ends + 1) - tp
    return tp, fp, s_sorted[ends]


def auprc(scores, labels) -> float:
    s, y, n_pos = _check(scores, labels)
    tp, fp, _ = _blocks(s, y)
    precision = tp / (tp + fp)
    recall_gain = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(recall_gain * precision))


average_precision = auprc


def pr_curve(scores, labels):
    """(recall, precision, threshold) at every block end, starting at recall 0."""
    s, y, n_pos = _check(scores, labels)
    tp, fp, thr = _blocks(s, y)
    recall = np.r_[0.0, tp / n_pos]
    precision = np.r_[1.0, tp / (tp + fp)]
    return recall, precision, np.r_[np.inf, thr]


def _midpoint(a, b):
    m = a + (b - a) / 2.0
    return b if m <= a else m


def best_f1(scores, labels):
    """Maximum F1 over the threshold sweep and the smallest threshold reaching it.

    Candidates are -inf, midpoints between consecutive distinct scores, and
    +inf; a window is flagged when its score is >= the threshold.
    """
    s, y, n_pos = _check(scores, labels)
    tp, fp, vals = _blocks(s, y)  # descending distinct values
    f1 = 2.0 * tp / (2.0 * tp + fp + (n_pos - tp))
    # flagging all scores >= vals[k]; threshold sits just below vals[k]
    thr = np.empty(len(vals))
    thr[-1] = -np.inf
    for k in range(len(vals) - 1):
        thr[k] = _midpoint(vals[k + 1], vals[k])
    best = f1.max()  # the +inf candidate scores F1 = 0 and never wins
    # candidates with equal F1: the smallest threshold is the latest block
    k = int(np.flatnonzero(f1 == best)[-1])
    return float(best), float(thr[k])


def _runs(mask, log_ids, ordinals):
    """Run id per flagged window; runs break on log change or ordinal gap."""
    run = np.full(len(mask), -1, dtype=np.int64)
    current, prev_log, prev_ord = -1, None, None
    for i in np.flatnonzero(mask):
        if not (log_ids[i] == prev_log and ordinals[i] == prev_ord + 1):
            current += 1
        run[i] = current
        prev_log, prev_ord = log_ids[i], ordinals[i]
    return run, current + 1


def _sorted_view(log_ids, ordinals):
    log_ids = np.asarray(log_ids)
    ordinals = np.asarray(ordinals)
    order = np.lexsort((ordinals, log_ids.astype(str)))
    return order, log_ids[order], ordinals[order]


@dataclass
class EventScore:
    f1: float
    precision: float
    recall: float
    n_predicted: int
    n_truth: int
    degenerate: bool = False


def event_scores(labels, predicted, log_ids, ordinals) -> EventScore:
    """Event-level precision/recall from a binary prediction mask.

    Events are maximal runs of consecutive window ordinals within one log.
    A predicted event matches when it shares a window with a truth event and
    vice versa; each event counts once however many it overlaps.
    """
    order, ids, ords = _sorted_view(log_ids, ordinals)
    y = np.asarray(labels).astype(bool)[order]
    p = np.asarray(predicted).astype(bool)[order]
    truth_run, n_truth = _runs(y, ids, ords)
    pred_run, n_pred = _runs(p, ids, ords)
    both = y & p
    matched_truth = len(np.unique(truth_run[both]))
    matched_pred = len(np.unique(pred_run[both]))
    if n_truth == 0 and n_pred == 0:
        return EventScore(1.0, 1.0, 1.0, 0, 0, degenerate=True)
    if n_truth == 0 or n_pred == 0:
        return EventScore(0.0, 0.0 if n_pred else 1.0, 0.0 if n_truth else 1.0,
                          n_pred, n_truth)
    precision = matched_pred / n_pred
    recall = matched_truth / n_truth
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return EventScore(f1, precision, recall, n_pred, n_truth)


def event_f1(scores, labels, log_ids, ordinals, threshold) -> float:
    return event_scores(labels, np.asarray(scores) >= threshold, log_ids, ordinals).f1


def count_events(labels, log_ids, ordinals) -> int:
    order, ids, ords = _sorted_view(log_ids, ordinals)
    return _runs(np.asarray(labels).astype(bool)[order], ids, ords)[1]


def family_breakdown(scores, labels, families: Sequence, log_ids, ordinals,
                     threshold) -> dict:
    """Per-family AUPRC and event F1.

    Family f is scored on its own positive windows together with every
    negative window; other families' positives are left out, which also
    breaks any run passing through them.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    fam = np.array([f if f is not None else "" for f in families], dtype=object)
    out = {}
    for f in sorted({x for x, lab in zip(fam, y) if lab}):
        keep = ~y | (fam == f)
        sub_y = y[keep]
        entry = {"positive_windows": int(sub_y.sum())}
        if sub_y.all():
            entry["auprc"] = None
        else:
            entry["auprc"] = auprc(scores[keep], sub_y)
        ev = event_scores(sub_y, scores[keep] >= threshold,
                          np.asarray(log_ids)[keep], np.asarray(ordinals)[keep])
        entry["events"] = ev.n_truth
        entry["event_f1"] = ev.f1
        out[f] = entry
    return out


def aggregate_seeds(values: Sequence[float]):
    """Sample mean and sample (n-1) standard deviation."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise ValueError("aggregation needs at least two seeds")
    return float(v.mean()), float(v.std(ddof=1))
