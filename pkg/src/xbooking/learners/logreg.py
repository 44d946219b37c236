"""L2-regularised logistic regression fitted by damped Newton iterations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import NonConvergence, SingleClass
from .boosting import sigmoid


def standardize_fit(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = np.nanmean(X, axis=0) if len(X) else np.zeros(X.shape[1])
    mean = np.where(np.isnan(mean), 0.0, mean)
    scale = np.nanstd(X, axis=0) if len(X) else np.ones(X.shape[1])
    scale = np.where(np.isnan(scale) | (scale == 0), 1.0, scale)
    return mean, scale


def standardize_apply(X: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    Z = (np.asarray(X, dtype=float) - mean) / scale
    # missing values are imputed at the training mean
    return np.where(np.isnan(Z), 0.0, Z)


def objective(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, l2: float,
              w: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """Penalised negative log-likelihood and its gradient.

    ``theta[0]`` is the intercept (not penalised), ``theta[1:]`` the weights.
    """
    if w is None:
        w = np.ones(len(y))
    m = theta[0] + Z @ theta[1:]
    loss = float((w * (np.logaddexp(0.0, m) - y * m)).sum() + 0.5 * l2 * theta[1:] @ theta[1:])
    r = w * (sigmoid(m) - y)
    grad = np.concatenate([[r.sum()], Z.T @ r + l2 * theta[1:]])
    return loss, grad


@dataclass
class LogisticModel:
    intercept: float
    weights: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    feature_names: list
    params: dict = field(default_factory=dict)
    n_iter: int = field(default=0, compare=False)
    grad_norm: float = field(default=0.0, compare=False)

    model_type = "logistic"

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogisticModel):
            return NotImplemented
        return (self.intercept == other.intercept and self.feature_names == other.feature_names
                and self.params == other.params
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("weights", "mean", "scale")))

    def margin(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + standardize_apply(X, self.mean, self.scale) @ self.weights

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.margin(X))


def train_logreg(X: np.ndarray, y: np.ndarray, feature_names: Sequence[str], l2: float = 1.0,
                 max_iter: int = 100, tol: float = 1e-8, pos_weight: float = 1.0) -> LogisticModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0 or y.min() == y.max():
        raise SingleClass("logistic regression needs both classes")
    mean, scale = standardize_fit(X)
    Z = standardize_apply(X, mean, scale)
    w = np.where(y > 0, pos_weight, 1.0)
    n, d = Z.shape
    A = np.column_stack([np.ones(n), Z])
    penalty = np.full(d + 1, l2)
    penalty[0] = 0.0

    theta = np.zeros(d + 1)
    rate = (w * y).sum() / w.sum()
    theta[0] = np.log(rate) - np.log1p(-rate)
    loss, grad = objective(theta, Z, y, l2, w)
    it = 0
    while np.max(np.abs(grad)) > tol and it < max_iter:
        it += 1
        p = sigmoid(A @ theta)
        H = (A * (w * p * (1 - p))[:, None]).T @ A + np.diag(penalty)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = theta - t * step
            c_loss, c_grad = objective(cand, Z, y, l2, w)
            if c_loss <= loss - 1e-4 * t * (grad @ step) or t < 1e-10:
                break
            t *= 0.5
        theta, loss, grad = cand, c_loss, c_grad

    gnorm = float(np.max(np.abs(grad)))
    if gnorm > tol:
        raise NonConvergence(f"no convergence after {it} Newton iterations", gnorm)
    params = {"l2": l2, "max_iter": max_iter, "tol": tol, "pos_weight": pos_weight}
    return LogisticModel(float(theta[0]), theta[1:].copy(), mean, scale, list(feature_names),
                         params, n_iter=it, grad_norm=gnorm)
