"""Confusion-matrix scores, ROC curves and per-cluster accuracy tables.

Scores whose denominator is zero are returned as ``None`` ("undefined"),
never as 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    def __post_init__(self):
        for name in ("tn", "fp", "fn", "tp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def as_matrix(self) -> np.ndarray:
        """Rows are actual 0/1, columns predicted 0/1."""
        return np.array([[self.tn, self.fp], [self.fn, self.tp]])

    def to_dict(self) -> dict:
        return {"tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp}


def confusion_matrix(predicted, actual) -> ConfusionMatrix:
    predicted = np.asarray(predicted).astype(np.int64).ravel()
    actual = np.asarray(actual).astype(np.int64).ravel()
    if predicted.shape != actual.shape:
        raise ValueError(f"{predicted.size} predictions for {actual.size} labels")
    if predicted.size == 0:
        raise ValueError("no samples to score")
    return ConfusionMatrix(
        tn=int(np.sum((predicted == 0) & (actual == 0))),
        fp=int(np.sum((predicted == 1) & (actual == 0))),
        fn=int(np.sum((predicted == 0) & (actual == 1))),
        tp=int(np.sum((predicted == 1) & (actual == 1))),
    )


def _ratio(num, den):
    return None if den == 0 else num / den


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return (cm.tn + cm.tp) / cm.total


def precision(cm: ConfusionMatrix):
    return _ratio(cm.tp, cm.tp + cm.fp)


def recall(cm: ConfusionMatrix):
    return _ratio(cm.tp, cm.tp + cm.fn)


def f1(cm: ConfusionMatrix):
    p, r = precision(cm), recall(cm)
    if p is None or r is None or p == 0 or r == 0:
        return None
    return 2.0 / (1.0 / p + 1.0 / r)


# --------------------------------------------------------------------------
# ROC
# --------------------------------------------------------------------------

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "fpr", "tpr"])
            for t, x, y in self.points:
                w.writerow([repr(t), repr(x), repr(y)])


def roc_curve(scores, actual) -> RocCurve:
    """Sweep thresholds from high to low, predicting 1 when ``score > t``.

    Thresholds are the distinct scores plus +inf and -inf sentinels, so the
    curve runs from (0, 0) to (1, 1). AUC is the trapezoidal area.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    actual = np.asarray(actual).astype(np.int64).ravel()
    if scores.shape != actual.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(actual.sum())
    n_neg = actual.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes among the labels")

    distinct = np.unique(scores)[::-1]
    thresholds = np.concatenate([[np.inf], distinct, [-np.inf]])
    # predicted positives at threshold t are the samples with score > t
    pos_sorted = np.sort(scores[actual == 1])
    neg_sorted = np.sort(scores[actual == 0])
    tp = pos_sorted.size - np.searchsorted(pos_sorted, thresholds, side="right")
    fp = neg_sorted.size - np.searchsorted(neg_sorted, thresholds, side="right")
    tpr = tp / n_pos
    fpr = fp / n_neg
    auc = float(_trapezoid(tpr, fpr))
    return RocCurve(thresholds, fpr, tpr, auc)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterAccuracy:
    cluster: int
    n: int
    label: int
    accuracy: float | None  # None: no members (blank in the table)


def per_cluster_accuracy(model, data) -> list:
    """Hard-assign every row and score each cluster against its label."""
    from .classifier import assign_cluster, dependency_probabilities

    assigned = assign_cluster(dependency_probabilities(data.features, model.gmm))
    rows = []
    for k in range(model.n_components):
        members = assigned == k
        n = int(members.sum())
        label = int(model.cluster_labels[k])
        acc = float(np.mean(data.labels[members] == label)) if n else None
        rows.append(ClusterAccuracy(k, n, label, acc))
    return rows


def score_report(predicted, actual, scores=None, clusters=None) -> dict:
    """JSON-ready summary: confusion matrix, the four scores, AUC, cluster table."""
    cm = confusion_matrix(predicted, actual)
    report = {
        "confusion_matrix": cm.to_dict(),
        "n_samples": cm.total,
        "accuracy": accuracy(cm),
        "precision": precision(cm),
        "recall": recall(cm),
        "f1": f1(cm),
        "auc": None,
    }
    if scores is not None:
        try:
            report["auc"] = roc_curve(scores, actual).auc
        except ValueError:
            report["auc"] = None
    if clusters is not None:
        report["per_cluster"] = [
            {"cluster": c.cluster, "n": c.n, "label": c.label, "accuracy": c.accuracy}
            for c in clusters
        ]
    return report


def format_score(value) -> str:
    return "undefined" if value is None else f"{value:.4f}"


def dump_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
