from __future__ import annotations

import numpy as np

from ..numerics import log_softmax, softmax_vec
from .base import ClassifierKind, ProbClassifier


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            self.params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def init_dense(rng: np.random.Generator, fan_in: int, fan_out: int):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out)


def mlp_logits(params, X):
    hidden = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return hidden @ params["W2"] + params["b2"]


def mlp_loss_and_grads(params: dict, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy of a one-hidden-layer ReLU network and its gradients."""
    pre = X @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ params["W2"] + params["b2"]
    n = X.shape[0]
    rows = np.arange(n)
    loss = -log_softmax(logits, axis=1)[rows, y].mean()

    d_logits = softmax_vec(logits, axis=1)
    d_logits[rows, y] -= 1.0
    d_logits /= n
    d_hidden = (d_logits @ params["W2"].T) * (pre > 0)
    grads = {
        "W2": hidden.T @ d_logits,
        "b2": d_logits.sum(axis=0),
        "W1": X.T @ d_hidden,
        "b1": d_hidden.sum(axis=0),
    }
    return float(loss), grads


class MLPClassifier(ProbClassifier):
    kind = ClassifierKind.MLP1H

    def __init__(self, params: dict, n_classes: int):
        super().__init__(n_classes, params["W1"].shape[0])
        self.params = params

    @classmethod
    def zeros(cls, input_dim: int, hidden: int, n_classes: int) -> "MLPClassifier":
        return cls({"W1": np.zeros((input_dim, hidden)), "b1": np.zeros(hidden),
                    "W2": np.zeros((hidden, n_classes)), "b2": np.zeros(n_classes)}, n_classes)

    def logits(self, X):
        return mlp_logits(self.params, np.asarray(X, dtype=np.float64))

    def _raw_proba(self, X):
        return softmax_vec(self.logits(X), axis=1)


def fit_mlp(X, y, n_classes, rng: np.random.Generator, hidden: int = 128, epochs: int = 20,
            batch_size: int = 64, lr: float = 1e-3) -> MLPClassifier:
    n, d = X.shape
    W1, b1 = init_dense(rng, d, hidden)
    W2, b2 = init_dense(rng, hidden, n_classes)
    params = {"W1": W1, "b1": b1, "W2": W2, "b2": b2}
    opt = Adam(params, lr=lr)
    model = MLPClassifier(params, n_classes)
    model.epoch_loss = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            loss, grads = mlp_loss_and_grads(params, X[idx], y[idx])
            opt.step(grads)
            total += loss * len(idx)
        model.epoch_loss.append(total / n)
    return model
