from __future__ import annotations

import numpy as np

from ..numerics import log_softmax, softmax_vec
from .base import ClassifierKind, ProbClassifier
from .trees import NewtonCriterion, SortedColumns, Tree, grow_tree


class GradientBoosting(ProbClassifier):
    """Softmax boosting with one regression tree per class and round.

    ``rounds[r][c]`` is the tree adding to class ``c``'s score in round ``r``;
    its leaf values already include the learning rate.
    """

    kind = ClassifierKind.GBT

    def __init__(self, n_classes: int, input_dim: int):
        super().__init__(n_classes, input_dim)
        self.rounds: list[list[Tree]] = []
        self.train_loss: list[float] = []

    def decision_function(self, X, n_rounds: int | None = None):
        scores = np.zeros((X.shape[0], self.n_classes))
        for trees in self.rounds[:n_rounds]:
            for c, tree in enumerate(trees):
                scores[:, c] += tree.predict(X)[:, 0]
        return scores

    def _raw_proba(self, X):
        return softmax_vec(self.decision_function(X), axis=1)


def fit_gbt(X, y, n_classes, n_rounds: int = 100, max_depth: int = 6,
            learning_rate: float = 0.3, reg_lambda: float = 1.0,
            min_child_weight: float = 1.0) -> GradientBoosting:
    n, d = X.shape
    onehot = np.eye(n_classes)[y]
    cols = SortedColumns.build(X)
    crit = NewtonCriterion(reg_lambda, min_child_weight, learning_rate)
    model = GradientBoosting(n_classes, d)
    scores = np.zeros((n, n_classes))
    rows = np.arange(n)
    model.train_loss.append(float(-log_softmax(scores, axis=1)[rows, y].mean()))
    for _ in range(n_rounds):
        p = softmax_vec(scores, axis=1)
        grad = p - onehot
        hess = np.maximum(p * (1.0 - p), 1e-16)
        trees = []
        for c in range(n_classes):
            tree = grow_tree(X, cols, np.column_stack([grad[:, c], hess[:, c]]), crit,
                             max_depth=max_depth)
            trees.append(tree)
            scores[:, c] += tree.predict(X)[:, 0]
        model.rounds.append(trees)
        model.train_loss.append(float(-log_softmax(scores, axis=1)[rows, y].mean()))
    return model
