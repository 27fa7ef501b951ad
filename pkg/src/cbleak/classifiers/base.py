from __future__ import annotations

import enum

import numpy as np

from ..numerics import EPS, InvalidParameterError, clamp_renormalize, softmax_vec


class ClassifierKind(enum.Enum):
    MLP1H = "mlp"
    RANDOM_FOREST = "rf"
    GBT = "gbt"

    @classmethod
    def parse(cls, value) -> "ClassifierKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(
                f"unknown classifier {value!r}; expected one of mlp, rf, gbt") from None


def check_training_data(X, y, n_classes):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidParameterError("training data must be a non-empty 2-D array")
    if y.shape != (X.shape[0],):
        raise InvalidParameterError(f"{X.shape[0]} rows but {y.shape} labels")
    if not np.all(np.isfinite(X)):
        raise InvalidParameterError("training data contains non-finite values")
    if n_classes < 2:
        raise InvalidParameterError("need at least two classes")
    if y.min() < 0 or y.max() >= n_classes:
        raise InvalidParameterError(f"labels must lie in [0, {n_classes})")
    return X, y.astype(np.int64)


class ProbClassifier:
    """Common prediction path for the three learners.

    Subclasses implement ``_raw_proba``. A fitted temperature ``T`` turns the
    clamped probabilities ``p`` into ``softmax(ln p / T)``.
    """

    kind: ClassifierKind

    def __init__(self, n_classes: int, input_dim: int):
        self.n_classes = n_classes
        self.input_dim = input_dim
        self.temperature = 1.0
        self.constant_class: int | None = None

    def _raw_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def uncalibrated_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise InvalidParameterError(
                f"expected {self.input_dim} input columns, got shape {X.shape}")
        if self.constant_class is not None:
            p = np.full((X.shape[0], self.n_classes), EPS)
            p[:, self.constant_class] = 1.0
        else:
            p = self._raw_proba(X)
        return clamp_renormalize(p)

    def predict_proba(self, X) -> np.ndarray:
        p = self.uncalibrated_proba(X)
        if self.temperature != 1.0:
            p = clamp_renormalize(softmax_vec(np.log(p) / self.temperature, axis=1))
        return p

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)
