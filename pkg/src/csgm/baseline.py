"""Logistic regression by full-batch gradient descent, used as a benchmark."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import EncodedDataset
from .errors import NumericalError


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    loss_trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "weights": np.asarray(self.weights).tolist(),
            "bias": float(self.bias),
            "loss_trace": [float(v) for v in self.loss_trace],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LogisticModel":
        return cls(np.asarray(doc["weights"], dtype=float), float(doc["bias"]), list(doc["loss_trace"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def logistic_loss(X, y, w, b, l2):
    """Mean negative log-likelihood plus (l2 / 2) * ||w||^2."""
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))


def logistic_gradient(X, y, w, b, l2):
    """Gradient of :func:`logistic_loss` with respect to ``(w, b)``."""
    residual = expit(X @ w + b) - y
    return X.T @ residual / X.shape[0] + l2 * w, float(residual.mean())


def fit_logistic(train: EncodedDataset, epochs: int = 2000, learning_rate: float = 0.1,
                 l2: float = 1e-4, seed: int | None = None) -> LogisticModel:
    """Full-batch gradient descent from zero weights (or a small seeded draw).

    ``loss_trace[i]`` is the objective after ``i`` updates.
    """
    if epochs <= 0 or learning_rate <= 0:
        raise ValueError("epochs and learning_rate must be positive")
    X = np.asarray(train.features, dtype=float)
    y = np.asarray(train.labels, dtype=float)
    if seed is None:
        w = np.zeros(X.shape[1])
    else:
        w = np.random.default_rng(seed).normal(0.0, 0.01, X.shape[1])
    b = 0.0
    trace = [logistic_loss(X, y, w, b, l2)]
    for epoch in range(1, epochs + 1):
        gw, gb = logistic_gradient(X, y, w, b, l2)
        w = w - learning_rate * gw
        b = b - learning_rate * gb
        loss = logistic_loss(X, y, w, b, l2)
        if not np.isfinite(loss):
            raise NumericalError(f"loss diverged at epoch {epoch}", stage="fit_logistic")
        trace.append(loss)
    return LogisticModel(w, b, trace)


def predict_logistic(model: LogisticModel, x):
    """Probability of label 1; scalar for one sample, array for a matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != np.asarray(model.weights).shape[0]:
        raise ValueError(f"expected {np.asarray(model.weights).shape[0]} features, got {x.shape[-1]}")
    p = expit(x @ model.weights + model.bias)
    return float(p) if np.ndim(p) == 0 else p


def predict_logistic_label(model: LogisticModel, x):
    p = predict_logistic(model, x)
    if np.ndim(p) == 0:
        return int(p > 0.5)
    return (p > 0.5).astype(np.int64)
