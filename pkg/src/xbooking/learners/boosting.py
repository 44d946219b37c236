"""Gradient-boosted trees for binary log-loss.

``order="first"`` is classic gradient boosting: each tree is a least-squares
fit to the pseudo-residuals y - p, and every leaf then takes one
Newton-Raphson step of the line search for its constant.

``order="second"`` is regularised second-order boosting: splits maximise
the gradient/hessian gain with L2 penalty ``reg_lambda`` and split cost
``gamma``; leaves take the value -G / (H + lambda).

The learning rate is folded into stored leaf values, so a model's raw
margin is simply ``base_score + sum(tree outputs)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..errors import SingleClass
from .tree import Newton, SquaredError, Tree, build_tree, presort

DEFAULTS = {
    "n_trees": 300,
    "learning_rate": 0.1,
    "max_depth": 4,
    "order": "second",
    "reg_lambda": 1.0,
    "gamma": 0.0,
    "min_child_weight": 1.0,
    "min_samples_leaf": 1,
    "subsample": 1.0,
    "pos_weight": 1.0,
    "seed": 42,
}


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -np.asarray(z, dtype=float)))


def logit(p: float) -> float:
    return float(np.log(p) - np.log1p(-p))


def log_loss(y: np.ndarray, margin: np.ndarray, w: Optional[np.ndarray] = None) -> float:
    """Mean (weighted) binary log-loss of raw margins."""
    per_row = np.logaddexp(0.0, margin) - y * margin
    if w is None:
        return float(per_row.mean())
    return float((w * per_row).sum() / w.sum())


@dataclass
class BoostedModel:
    base_score: float
    trees: List[Tree]
    learning_rate: float
    order: str
    feature_names: List[str]
    params: dict = field(default_factory=dict)
    # weighted training positive rate; base_score == logit(prior)
    prior: Optional[float] = None
    # per-round training loss; diagnostic only, not serialized
    train_loss: List[float] = field(default_factory=list, compare=False, repr=False)

    model_type = "boosted"

    def _offset(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(len(X))
        for t in self.trees:
            out += t.predict(X)
        return out

    def margin(self, X: np.ndarray) -> np.ndarray:
        return self.base_score + self._offset(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        offset = self._offset(X)
        p = sigmoid(self.base_score + offset)
        if self.prior is not None:
            # sigmoid(logit(q)) can be off by an ulp; rows the trees leave
            # untouched get the stored prior itself
            p = np.where(offset == 0.0, self.prior, p)
        return p

    @property
    def base_rate(self) -> float:
        if self.prior is not None:
            return float(self.prior)
        return float(sigmoid(self.base_score))


def train_boosted(X: np.ndarray, y: np.ndarray, feature_names: Sequence[str], **params) -> BoostedModel:
    unknown = set(params) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown boosting parameters: {sorted(unknown)}")
    p = {**DEFAULTS, **params}
    if p["order"] not in ("first", "second"):
        raise ValueError("order must be 'first' or 'second'")
    if not 0.0 < p["subsample"] <= 1.0:
        raise ValueError("subsample must lie in (0, 1]")

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0 or y.min() == y.max():
        raise SingleClass("boosting needs both classes in the training set")
    n = len(y)
    w = np.where(y > 0, float(p["pos_weight"]), 1.0)
    prior = float((w * y).sum() / w.sum())
    base = logit(prior)
    lr = float(p["learning_rate"])
    rng = np.random.default_rng(p["seed"])
    sorted_idx = presort(X)
    ones = np.ones(n)

    F = np.full(n, base)
    trees: List[Tree] = []
    trace: List[float] = []
    for _ in range(int(p["n_trees"])):
        prob = sigmoid(F)
        if p["subsample"] < 1.0:
            k = max(1, int(np.floor(p["subsample"] * n)))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        else:
            rows = None

        if p["order"] == "second":
            g = w * (prob - y)
            h = w * prob * (1.0 - prob)
            crit = Newton(p["reg_lambda"], p["gamma"], p["min_child_weight"], p["min_samples_leaf"])
            tree = build_tree(X, np.column_stack([ones, g, h]), crit,
                              max_depth=p["max_depth"], rows=rows, sorted_idx=sorted_idx)
        else:
            resid = y - prob
            hess = w * prob * (1.0 - prob)

            def newton_leaf(leaf_rows, resid=resid, hess=hess):
                den = hess[leaf_rows].sum()
                return float((w[leaf_rows] * resid[leaf_rows]).sum() / max(den, 1e-12))

            crit = SquaredError(newton_leaf, p["min_samples_leaf"])
            tree = build_tree(X, np.column_stack([ones, w, w * resid]), crit,
                              max_depth=p["max_depth"], rows=rows, sorted_idx=sorted_idx)
        tree.value *= lr
        F += tree.predict(X)
        trees.append(tree)
        trace.append(log_loss(y, F, w))

    return BoostedModel(base, trees, lr, p["order"], list(feature_names), params=p, prior=prior,
                        train_loss=trace)
