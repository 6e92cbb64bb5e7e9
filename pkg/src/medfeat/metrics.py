"""Ranking and threshold metrics: AUC, Youden threshold, F1, aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


def _check_binary(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    pos = int((labels == 1).sum())
    if pos == 0 or pos == len(labels):
        raise MetricError("both classes must be present")
    return labels


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie).

    Computed from average ranks; exactly equal to brute-force pair counting
    (wins + half-ties over n_pos * n_neg).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    ranks[order] = np.arange(1, len(scores) + 1)
    # Average ranks within tie groups.
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Midpoints between adjacent distinct scores, plus -inf/+inf sentinels."""
    distinct = np.unique(scores)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate(([-np.inf], mids, [np.inf]))


def youden_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Threshold maximizing TPR - FPR; ties broken toward the larger one.

    Predictions use score >= threshold. The +inf sentinel (predict all
    negative) wins when no threshold separates anything.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    best_j = -np.inf
    best_t = -np.inf
    for t in _threshold_candidates(scores):
        pred = scores >= t
        tpr = int((pred & (labels == 1)).sum()) / n_pos
        fpr = int((pred & (labels == 0)).sum()) / n_neg
        j = tpr - fpr
        if j >= best_j:
            best_j = j
            best_t = t
    return float(best_t)


def f1_at(scores: np.ndarray, labels: np.ndarray, threshold: float) -> float:
    """F1 of (score >= threshold); 0 when precision + recall is 0."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pred = scores >= threshold
    tp = int((pred & (labels == 1)).sum())
    fp = int((pred & (labels == 0)).sum())
    fn = int((~pred & (labels == 1)).sum())
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


@dataclass(frozen=True)
class EvalReport:
    """Metrics for one split, or a mean +- sample-std aggregate of several."""

    auc: float
    f1: float
    threshold: float
    auc_std: float | None = None
    f1_std: float | None = None
    n_splits: int = 1

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "f1": self.f1,
            "threshold": self.threshold,
            "auc_std": self.auc_std,
            "f1_std": self.f1_std,
            "n_splits": self.n_splits,
        }

    @staticmethod
    def from_dict(doc: dict) -> "EvalReport":
        return EvalReport(
            auc=doc["auc"],
            f1=doc["f1"],
            threshold=doc["threshold"],
            auc_std=doc.get("auc_std"),
            f1_std=doc.get("f1_std"),
            n_splits=doc.get("n_splits", 1),
        )


def evaluate(scores: np.ndarray, labels: np.ndarray, threshold: float) -> EvalReport:
    return EvalReport(
        auc=auc(scores, labels),
        f1=f1_at(scores, labels, threshold),
        threshold=float(threshold),
    )


def aggregate(reports: list[EvalReport]) -> EvalReport:
    """Mean and sample standard deviation (n-1 denominator) across splits."""
    if len(reports) < 2:
        raise MetricError("aggregation needs at least two reports")
    aucs = np.array([r.auc for r in reports])
    f1s = np.array([r.f1 for r in reports])
    thresholds = np.array([r.threshold for r in reports])
    return EvalReport(
        auc=float(aucs.mean()),
        f1=float(f1s.mean()),
        threshold=float(thresholds.mean()),
        auc_std=float(aucs.std(ddof=1)),
        f1_std=float(f1s.std(ddof=1)),
        n_splits=len(reports),
    )


def improvement_pct(new: float, base: float) -> float:
    """Percentage improvement of ``new`` over ``base``."""
    if base == 0:
        return float("inf") if new > 0 else 0.0
    return (new - base) / base * 100.0
