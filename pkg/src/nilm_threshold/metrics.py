"""Evaluation metrics: MAE in watts, per-series F1, pooled precision/recall and ROC-AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: float
    fp: float
    fn: float
    tn: float

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


def mae(pred, truth, scale_watts: float = 1.0) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise InputError(f"shape mismatch {pred.shape} vs {truth.shape}")
    return float(scale_watts * np.mean(np.abs(pred - truth)))


def predicted_status(prob) -> np.ndarray:
    """ON wherever the predicted probability is at least 0.5."""
    return (np.asarray(prob, dtype=np.float64) >= 0.5).astype(np.int8)


def confusion(pred_status, truth_status) -> ConfusionCounts:
    s = np.asarray(pred_status, dtype=np.float64)
    y = np.asarray(truth_status, dtype=np.float64)
    if s.shape != y.shape:
        raise InputError(f"shape mismatch {s.shape} vs {y.shape}")
    return ConfusionCounts(
        tp=float(np.sum(s * y)),
        fp=float(np.sum(s * (1 - y))),
        fn=float(np.sum((1 - s) * y)),
        tn=float(np.sum((1 - s) * (1 - y))),
    )


def series_f1(c: ConfusionCounts) -> float:
    denom = c.tp + 0.5 * (c.fp + c.fn)
    # nothing ON in truth or prediction: all-negative agreement counts as perfect
    return 1.0 if denom == 0 else c.tp / denom


def f1_per_series(series_confusions) -> float:
    series_confusions = list(series_confusions)
    if not series_confusions:
        raise InputError("F1 needs at least one series")
    return float(np.mean([series_f1(c) for c in series_confusions]))


def precision_recall(c: ConfusionCounts) -> tuple[float, float]:
    """Pooled precision and recall; an empty denominator scores 1.0 (nothing claimed / nothing missed)."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 1.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 1.0
    return precision, recall


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    _, first, counts = np.unique(sorted_x, return_index=True, return_counts=True)
    mean_rank = first + (counts + 1) / 2.0
    ranks = np.empty(x.size, dtype=np.float64)
    ranks[order] = np.repeat(mean_rank, counts)
    return ranks


def roc_auc(scores, truth) -> float:
    """Mann-Whitney form of the ROC area; tied scores get half credit."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    truth = np.asarray(truth).ravel()
    if scores.shape != truth.shape:
        raise InputError(f"shape mismatch {scores.shape} vs {truth.shape}")
    pos = truth == 1
    n_pos = int(pos.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("ROC-AUC is undefined when truth has a single class")
    ranks = average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def classification_scores(prob, truth) -> dict:
    """F1 over windows (rows) plus pooled precision, recall and AUC for (N, L) arrays."""
    prob = np.atleast_2d(np.asarray(prob, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    pred = predicted_status(prob)
    per_series = [confusion(p, t) for p, t in zip(pred, truth)]
    pooled = sum(per_series[1:], per_series[0])
    precision, recall = precision_recall(pooled)
    try:
        auc = roc_auc(prob, truth)
    except InputError:
        auc = None
    return {"f1": f1_per_series(per_series), "precision": precision, "recall": recall, "auc": auc}


def status_f1(pred_status, truth_status) -> float:
    """Per-series F1 for already-binarised (N, L) predictions."""
    pred = np.atleast_2d(pred_status)
    truth = np.atleast_2d(truth_status)
    return f1_per_series(confusion(p, t) for p, t in zip(pred, truth))
