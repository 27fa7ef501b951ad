from __future__ import annotations

import math

import numpy as np

from .base import ClassifierKind, ProbClassifier
from .trees import GiniCriterion, SortedColumns, Tree, grow_tree


class RandomForest(ProbClassifier):
    """Bagged Gini trees; probabilities are the mean of leaf class frequencies."""

    kind = ClassifierKind.RANDOM_FOREST

    def __init__(self, n_classes: int, input_dim: int, trees: list[Tree] | None = None):
        super().__init__(n_classes, input_dim)
        self.trees = list(trees or [])

    def _raw_proba(self, X):
        total = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)


def fit_forest(X, y, n_classes, rng: np.random.Generator, n_trees: int = 100,
               max_depth: int | None = None, max_features: int | str | None = "sqrt",
               bootstrap: bool = True) -> RandomForest:
    n, d = X.shape
    if max_features == "sqrt":
        max_features = max(1, int(math.sqrt(d)))
    onehot = np.eye(n_classes)[y]
    cols = SortedColumns.build(X)
    crit = GiniCriterion(n_classes)
    model = RandomForest(n_classes, d)
    for _ in range(n_trees):
        if bootstrap:
            weight = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        else:
            weight = np.ones(n)
        model.trees.append(grow_tree(X, cols, onehot * weight[:, None], crit,
                                     active=weight > 0, max_depth=max_depth,
                                     max_features=max_features, rng=rng))
    return model
