"""In-repo learners and evaluation."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..errors import SchemaMismatch
from .boosting import BoostedModel, train_boosted
from .io import load_model, save_model
from .logreg import LogisticModel, train_logreg
from .metrics import EvalReport, evaluate_scores, roc_auc, roc_curve, trapezoid_auc
from .tree import DecisionTree, train_tree

LEARNERS = ("tree", "logreg", "gb", "xgb")

__all__ = [
    "BoostedModel", "DecisionTree", "LogisticModel", "EvalReport", "LEARNERS",
    "train_boosted", "train_logreg", "train_tree", "train_learner",
    "predict_proba", "evaluate", "evaluate_scores", "roc_auc", "roc_curve", "trapezoid_auc",
    "save_model", "load_model",
]


def _matrix(model, features, feature_names: Optional[Sequence[str]]):
    if hasattr(features, "to_arrays"):
        X, _, names = features.to_arrays()
        feature_names = names
    else:
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
    if feature_names is not None and list(feature_names) != list(model.feature_names):
        raise SchemaMismatch(f"features {list(feature_names)} do not match model schema "
                             f"{list(model.feature_names)}")
    if X.shape[1] != len(model.feature_names):
        raise SchemaMismatch(f"expected {len(model.feature_names)} feature columns, got {X.shape[1]}")
    return X


def predict_proba(model, features, feature_names: Optional[Sequence[str]] = None) -> np.ndarray:
    """Booking probability for each row of ``features`` (array or Dataset)."""
    return model.predict_proba(_matrix(model, features, feature_names))


def evaluate(model, test, threshold: float = 0.5) -> EvalReport:
    X, y, names = test.to_arrays()
    return evaluate_scores(y, predict_proba(model, X, names), threshold)


def train_learner(kind: str, X, y, feature_names, **params):
    """Dispatch on learner name: tree, logreg, gb (first order), xgb (second order)."""
    if kind == "tree":
        return train_tree(X, y, feature_names, **params)
    if kind == "logreg":
        return train_logreg(X, y, feature_names, **params)
    if kind == "gb":
        return train_boosted(X, y, feature_names, **{**params, "order": "first"})
    if kind == "xgb":
        return train_boosted(X, y, feature_names, **{**params, "order": "second"})
    raise ValueError(f"unknown learner {kind!r}; expected one of {LEARNERS}")
