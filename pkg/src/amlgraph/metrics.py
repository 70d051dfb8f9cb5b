"""Evaluation metrics for binary subgraph classification.

Positive means suspicious throughout. Micro-averaged F1 over an
exhaustive binary labeling equals accuracy (tp + tn) / total; the
general micro formula is implemented anyway and the identity is covered
by tests, because a high F1 next to a low PR-AUC reads oddly otherwise
under heavy class imbalance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def precision(self) -> float:
        denom = self.tp + self.fp
        if denom == 0:
            raise UndefinedMetricError("no predicted positives")
        return self.tp / denom

    def recall(self) -> float:
        denom = self.tp + self.fn
        if denom == 0:
            raise UndefinedMetricError("no actual positives")
        return self.tp / denom

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn}


def _check_pair(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise ContractError("scores and labels must be 1-d and the same length")
    return s, y


def confusion(scores, labels, threshold: float = 0.5) -> ConfusionMatrix:
    """Score >= threshold predicts positive."""
    s, y = _check_pair(scores, labels)
    pred = s >= threshold
    return ConfusionMatrix(
        tp=int(np.count_nonzero(pred & (y == 1))),
        fn=int(np.count_nonzero(~pred & (y == 1))),
        fp=int(np.count_nonzero(pred & (y == 0))),
        tn=int(np.count_nonzero(~pred & (y == 0))),
    )


def micro_f1(cm: ConfusionMatrix) -> float:
    """Micro-averaged F1 over both classes."""
    if cm.total == 0:
        raise UndefinedMetricError("empty confusion matrix")
    # per-class true positives / false positives / false negatives,
    # pooled: the positive class contributes (tp, fp, fn), the negative
    # class (tn, fn, fp)
    mtp = cm.tp + cm.tn
    mfp = cm.fp + cm.fn
    mfn = cm.fn + cm.fp
    return 2.0 * mtp / (2.0 * mtp + mfp + mfn)


def pr_auc(scores, labels) -> float:
    """Average precision: step-wise precision summed at each recall gain.

    Scores are processed in descending order with ties grouped, no
    interpolation.
    """
    s, y = _check_pair(scores, labels)
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("needs at least one positive and one negative")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    boundaries = np.nonzero(np.diff(s_sorted))[0]
    group_ends = np.append(boundaries, len(s_sorted) - 1)
    tp = np.cumsum(y_sorted)[group_ends]
    count = group_ends + 1
    precision = tp / count
    recall_gain = np.diff(np.concatenate(([0], tp))) / n_pos
    return float(np.sum(recall_gain * precision))


def roc_auc(scores, labels) -> float:
    """Mann-Whitney statistic via midranks: P(s+ > s-) + 0.5 P(tie)."""
    s, y = _check_pair(scores, labels)
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("needs at least one positive and one negative")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def threshold_sweep(scores, labels, thresholds=None) -> list[dict]:
    """Confusion counts with precision/recall across thresholds."""
    s, y = _check_pair(scores, labels)
    if thresholds is None:
        thresholds = np.linspace(0.0, 1.0, 101)
    rows = []
    for t in np.asarray(thresholds, dtype=float):
        cm = confusion(s, y, float(t))
        prec = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else float("nan")
        rec = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else float("nan")
        rows.append(
            {
                "threshold": float(t),
                "tp": cm.tp,
                "fn": cm.fn,
                "fp": cm.fp,
                "tn": cm.tn,
                "precision": prec,
                "recall": rec,
            }
        )
    return rows
