"""Probabilistic multiclass classifiers used as conditional-entropy estimators."""

from __future__ import annotations

import numpy as np

from ..numerics import InvalidParameterError, RngStream
from .base import ClassifierKind, ProbClassifier, check_training_data
from .forest import RandomForest, fit_forest
from .gbt import GradientBoosting, fit_gbt
from .mlp import MLPClassifier, fit_mlp, mlp_loss_and_grads
from .trees import Tree

_HYPER = {
    ClassifierKind.MLP1H: {"hidden", "epochs", "batch_size", "lr"},
    ClassifierKind.RANDOM_FOREST: {"n_trees", "max_depth", "max_features", "bootstrap"},
    ClassifierKind.GBT: {"n_rounds", "max_depth", "learning_rate", "reg_lambda",
                         "min_child_weight"},
}


def train_classifier(kind, X, y, n_classes: int, hyper: dict | None = None,
                     stream: RngStream | None = None) -> ProbClassifier:
    """Fit a classifier of the given kind on 0-based labels ``y``.

    ``hyper`` overrides the learner defaults. A training set holding a single
    class yields a model that predicts that class with certainty.
    """
    kind = ClassifierKind.parse(kind)
    X, y = check_training_data(X, y, n_classes)
    hyper = dict(hyper or {})
    unknown = set(hyper) - _HYPER[kind]
    if unknown:
        raise InvalidParameterError(f"unknown {kind.value} hyperparameters: {sorted(unknown)}")
    stream = stream or RngStream(0, f"classifier-{kind.value}")
    rng = stream.generator()

    present = np.unique(y)
    if present.size == 1:
        model = {ClassifierKind.MLP1H: lambda: MLPClassifier.zeros(X.shape[1], 1, n_classes),
                 ClassifierKind.RANDOM_FOREST: lambda: RandomForest(n_classes, X.shape[1]),
                 ClassifierKind.GBT: lambda: GradientBoosting(n_classes, X.shape[1])}[kind]()
        model.constant_class = int(present[0])
        return model

    if kind is ClassifierKind.MLP1H:
        return fit_mlp(X, y, n_classes, rng, **hyper)
    if kind is ClassifierKind.RANDOM_FOREST:
        return fit_forest(X, y, n_classes, rng, **hyper)
    return fit_gbt(X, y, n_classes, **hyper)


__all__ = [
    "ClassifierKind", "ProbClassifier", "MLPClassifier", "RandomForest", "GradientBoosting",
    "Tree", "train_classifier", "mlp_loss_and_grads", "fit_mlp", "fit_forest", "fit_gbt",
]
