"""Full-batch linear classifiers: L2 logistic regression and hinge-loss SVM."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

# step halvings tried per epoch before the epoch is declared a no-op
_MAX_HALVINGS = 30


def logistic_loss(w, b, X, y, l2):
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))


def logistic_loss_and_grad(w, b, X, y, l2):
    """Regularized mean log-loss and its gradient in ``(w, b)``; bias is not penalized."""
    z = X @ w + b
    n = X.shape[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))
    r = expit(z) - y
    gw = np.asarray(X.T @ r).ravel() / n + l2 * w
    gb = float(r.mean())
    return loss, gw, gb


def hinge_loss(w, b, X, s, l2):
    margin = s * (X @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margin)) + 0.5 * l2 * np.dot(w, w))


def hinge_subgradient(w, b, X, s, l2):
    margin = s * (X @ w + b)
    active = (margin < 1.0).astype(np.float64) * s
    n = X.shape[0]
    gw = -np.asarray(X.T @ active).ravel() / n + l2 * w
    gb = -float(active.sum()) / n
    return gw, gb


def _descend(loss_fn, grad_fn, d, epochs, step, decay):
    """Gradient descent with a decaying step and halving on any loss increase.

    The returned history is non-increasing by construction.
    """
    w, b = np.zeros(d), 0.0
    cur = loss_fn(w, b)
    history = [cur]
    for t in range(epochs):
        gw, gb = grad_fn(w, b)
        eta = step / (1.0 + decay * t)
        for _ in range(_MAX_HALVINGS):
            nw, nb = w - eta * gw, b - eta * gb
            new = loss_fn(nw, nb)
            if new <= cur:
                w, b, cur = nw, nb, new
                break
            eta *= 0.5
        history.append(cur)
    return w, b, history


@dataclass
class LogisticRegressionModel:
    w: np.ndarray
    b: float
    loss_history: list = field(default_factory=list, repr=False)
    threshold = 0.5

    @classmethod
    def fit(cls, X: sp.csr_matrix, y: np.ndarray, hp: dict, seed: int):
        yf = y.astype(np.float64)
        l2 = hp["l2"]
        w, b, hist = _descend(
            lambda w, b: logistic_loss(w, b, X, yf, l2),
            lambda w, b: logistic_loss_and_grad(w, b, X, yf, l2)[1:],
            X.shape[1], hp["epochs"], hp["step"], hp["decay"],
        )
        return cls(w, b, hist)

    def scores(self, X) -> np.ndarray:
        return expit(X @ self.w + self.b)

    def to_state(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_state(cls, state):
        return cls(np.asarray(state["w"], dtype=np.float64), float(state["b"]))


@dataclass
class LinearSVMModel:
    w: np.ndarray
    b: float
    loss_history: list = field(default_factory=list, repr=False)
    threshold = 0.0

    @classmethod
    def fit(cls, X: sp.csr_matrix, y: np.ndarray, hp: dict, seed: int):
        s = np.where(y == 1, 1.0, -1.0)
        l2 = hp["l2"]
        w, b, hist = _descend(
            lambda w, b: hinge_loss(w, b, X, s, l2),
            lambda w, b: hinge_subgradient(w, b, X, s, l2),
            X.shape[1], hp["epochs"], hp["step"], hp["decay"],
        )
        return cls(w, b, hist)

    def scores(self, X) -> np.ndarray:
        return np.asarray(X @ self.w + self.b, dtype=np.float64)

    def to_state(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_state(cls, state):
        return cls(np.asarray(state["w"], dtype=np.float64), float(state["b"]))
