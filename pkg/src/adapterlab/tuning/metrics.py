"""Classification metrics: accuracy, micro/macro F1 and Matthews correlation."""

from __future__ import annotations

import warnings

import numpy as np

METRICS = ("accuracy", "micro_f1", "macro_f1", "mcc")


class UndefinedMetricWarning(UserWarning):
    pass


def confusion_matrix(gold, pred, num_classes=None) -> np.ndarray:
    gold = np.asarray(gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if gold.shape != pred.shape or gold.ndim != 1:
        raise ValueError(f"gold {gold.shape} and predictions {pred.shape} must be equal-length vectors")
    k = int(max(gold.max(), pred.max())) + 1 if num_classes is None else num_classes
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (gold, pred), 1)
    return cm


def accuracy(gold, pred) -> float:
    gold, pred = np.asarray(gold), np.asarray(pred)
    return float((gold == pred).mean())


def micro_f1(gold, pred) -> float:
    # single-label multiclass: micro precision = micro recall = accuracy
    return accuracy(gold, pred)


def macro_f1(gold, pred) -> float:
    """Unweighted mean F1 over the labels present in gold or predictions."""
    cm = confusion_matrix(gold, pred)
    present = (cm.sum(axis=0) + cm.sum(axis=1)) > 0
    tp = np.diag(cm)[present].astype(float)
    denom = (cm.sum(axis=0) + cm.sum(axis=1))[present].astype(float)
    return float(np.mean(2.0 * tp / denom))


def mcc(gold, pred) -> float:
    """Multiclass Matthews correlation; 0.0 (with a warning) when undefined."""
    cm = confusion_matrix(gold, pred).astype(float)
    s = cm.sum()
    c = np.trace(cm)
    t = cm.sum(axis=1)
    p = cm.sum(axis=0)
    denom = np.sqrt((s * s - p @ p) * (s * s - t @ t))
    if denom == 0.0:
        warnings.warn("MCC undefined (constant gold or predictions); reporting 0.0", UndefinedMetricWarning)
        return 0.0
    return float((c * s - t @ p) / denom)


def compute_metric(name: str, gold, pred) -> float:
    if len(gold) == 0:
        raise ValueError("cannot score an empty split")
    try:
        fn = {"accuracy": accuracy, "micro_f1": micro_f1, "macro_f1": macro_f1, "mcc": mcc}[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; expected one of {METRICS}") from None
    return fn(gold, pred)
