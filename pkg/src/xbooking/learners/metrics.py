"""Binary classification metrics: confusion counts, threshold metrics, ROC and AUC."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Tuple

import numpy as np


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    confusion: List[List[int]]          # [[tn, fp], [fn, tp]]
    roc_points: List[Tuple[float, float, float]] = field(repr=False)
    threshold: float = 0.5
    n: int = 0
    positives: int = 0
    precision_undefined: bool = False

    def metrics_dict(self) -> dict:
        d = asdict(self)
        d.pop("roc_points")
        return d

    def to_json(self) -> str:
        return json.dumps(self.metrics_dict(), indent=2, sort_keys=True) + "\n"

    def roc_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for fpr, tpr, thr in self.roc_points:
            w.writerow([repr(float(fpr)), repr(float(tpr)), repr(float(thr))])
        return buf.getvalue()


def confusion_matrix(y_true, y_pred) -> List[List[int]]:
    y = np.asarray(y_true).astype(bool)
    p = np.asarray(y_pred).astype(bool)
    return [[int((~y & ~p).sum()), int((~y & p).sum())],
            [int((y & ~p).sum()), int((y & p).sum())]]


def midranks(x) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    x = np.asarray(x, dtype=float)
    _, inv, counts = np.unique(x, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    avg = upper - (counts - 1) / 2.0
    return avg[inv]


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney estimate of the AUC; tied pairs count one half."""
    y = np.asarray(y_true).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    r = midranks(scores)
    return float((r[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(y_true, scores) -> List[Tuple[float, float, float]]:
    """(fpr, tpr, threshold) at every distinct score, starting from (0, 0, inf).

    A row is predicted positive at threshold t when score >= t.
    """
    y = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=float)
    n_pos = max(int(y.sum()), 0)
    n_neg = len(y) - n_pos
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(s[1:] != s[:-1])[0], len(s) - 1] if len(s) else np.array([], int)
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = tp / n_pos if n_pos else np.zeros(len(last))
    fpr = fp / n_neg if n_neg else np.zeros(len(last))
    points = [(0.0, 0.0, math.inf)]
    points.extend((float(a), float(b), float(t)) for a, b, t in zip(fpr, tpr, s[last]))
    return points


def trapezoid_auc(points) -> float:
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def evaluate_scores(y_true, scores, threshold: float = 0.5) -> EvalReport:
    y = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=float)
    pred = s >= threshold
    (tn, fp), (fn, tp) = confusion_matrix(y, pred)
    n = len(y)
    undefined = tp + fp == 0
    precision = 0.0 if undefined else tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(
        accuracy=(tp + tn) / n if n else math.nan,
        precision=precision, recall=recall, f1=f1,
        roc_auc=roc_auc(y, s),
        confusion=[[tn, fp], [fn, tp]],
        roc_points=roc_curve(y, s),
        threshold=threshold, n=n, positives=int(y.sum()),
        precision_undefined=undefined,
    )
