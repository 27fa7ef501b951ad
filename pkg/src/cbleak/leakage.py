"""Classifier-based estimate of the leakage ``I(y; chat | c)``.

Two classifiers are fitted: ``g_a`` predicts ``y`` from ``[chat, c]`` and
``g_b`` predicts ``y`` from ``c`` alone. Their held-out cross-entropies
estimate ``H(y | chat, c)`` and ``H(y | c)``; the difference is the leakage
in nats. Negative differences are estimator artefacts and are reported as
they come out.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .calibration import CalibrationResult, calibrate
from .classifiers import ClassifierKind, ProbClassifier, train_classifier
from .numerics import InvalidParameterError, RngStream, clipped_neg_log, rng_stream
from .synthgen import Dataset

DEFAULT_RATIOS = (0.7, 0.15, 0.15)


class DegenerateSplitError(ValueError):
    """A data split is empty or too small to train on."""


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def split_dataset(n: int | Dataset, ratios=DEFAULT_RATIOS, seed: int = 0) -> Split:
    """Shuffle ``range(n)`` and cut it into train/val/test index sets.

    Sizes are ``floor(n * train)``, ``floor(n * val)`` and the remainder.
    """
    if isinstance(n, Dataset):
        n = n.n
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidParameterError(f"split ratios must be three positives summing to 1: {ratios}")
    n_train = math.floor(n * ratios[0] + 1e-9)
    n_val = math.floor(n * ratios[1] + 1e-9)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise DegenerateSplitError(
            f"n={n} gives an empty split ({n_train}/{n_val}/{n_test})")
    perm = rng_stream(seed, "split").permutation(n)
    return Split(perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])


def estimate_entropy(model: ProbClassifier, inputs, labels) -> float:
    """Mean clipped negative log-probability of the true labels, in nats."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise InvalidParameterError("cannot estimate entropy on an empty set")
    p = model.predict_proba(inputs)
    return float(np.mean(clipped_neg_log(p[np.arange(len(labels)), labels])))


def accuracy(model: ProbClassifier, inputs, labels) -> float:
    return float(np.mean(model.predict(inputs) == np.asarray(labels)))


@dataclass(frozen=True)
class LeakageReport:
    h_y_given_c: float
    h_y_given_chat_c: float
    leakage: float
    classifier: str
    temperature_a: float
    temperature_b: float
    acc_a: float
    acc_b: float
    n_train: int
    n_val: int
    n_test: int
    seed: int
    calibration_a: CalibrationResult
    calibration_b: CalibrationResult
    acc_a_uncalibrated: float
    acc_b_uncalibrated: float

    def as_dict(self) -> dict:
        return asdict(self)

    def pretty(self) -> str:
        return "\n".join([
            f"classifier        {self.classifier}",
            f"H(y|c)            {self.h_y_given_c:.6f} nats",
            f"H(y|chat,c)       {self.h_y_given_chat_c:.6f} nats",
            f"leakage           {self.leakage:.6f} nats",
            f"temperatures      g_a={self.temperature_a:.4f} g_b={self.temperature_b:.4f}",
            f"test accuracy     g_a={self.acc_a:.4f} g_b={self.acc_b:.4f}",
            f"split sizes       {self.n_train}/{self.n_val}/{self.n_test}",
            f"split seed        {self.seed}",
        ])


def _uncalibrated_accuracy(model, X, y):
    return float(np.mean(np.argmax(model.uncalibrated_proba(X), axis=1) == y))


def measure_leakage(ds: Dataset, kind=ClassifierKind.GBT, split_seed: int = 0,
                    ratios=DEFAULT_RATIOS, hyper: dict | None = None,
                    split: Split | None = None) -> LeakageReport:
    """Estimate ``I(y; chat | c)`` on ``ds``.

    Both classifiers are trained on the training split, temperature-scaled
    on the validation split, and scored on the test split. Pass ``split`` to
    reuse a partition computed elsewhere (it must match ``split_seed``).
    """
    kind = ClassifierKind.parse(kind)
    J = ds.config.J
    split = split or split_dataset(ds.n, ratios, split_seed)
    if np.unique(ds.Y[split.train]).size < 2:
        raise DegenerateSplitError("training split holds fewer than two classes")

    C = ds.C.astype(np.float64)
    inputs_a = np.hstack([np.asarray(ds.Chat, dtype=np.float64), C])
    Y = ds.Y
    tr, va, te = split.train, split.val, split.test

    g_a = train_classifier(kind, inputs_a[tr], Y[tr], J, hyper,
                           RngStream(split_seed, f"g_a-{kind.value}"))
    g_b = train_classifier(kind, C[tr], Y[tr], J, hyper,
                           RngStream(split_seed, f"g_b-{kind.value}"))
    acc_a0 = _uncalibrated_accuracy(g_a, inputs_a[te], Y[te])
    acc_b0 = _uncalibrated_accuracy(g_b, C[te], Y[te])
    cal_a = calibrate(g_a, inputs_a[va], Y[va])
    cal_b = calibrate(g_b, C[va], Y[va])

    h_a = estimate_entropy(g_a, inputs_a[te], Y[te])
    h_b = estimate_entropy(g_b, C[te], Y[te])
    return LeakageReport(
        h_y_given_c=h_b, h_y_given_chat_c=h_a, leakage=h_b - h_a,
        classifier=kind.value,
        temperature_a=cal_a.temperature, temperature_b=cal_b.temperature,
        acc_a=accuracy(g_a, inputs_a[te], Y[te]), acc_b=accuracy(g_b, C[te], Y[te]),
        n_train=len(tr), n_val=len(va), n_test=len(te), seed=split_seed,
        calibration_a=cal_a, calibration_b=cal_b,
        acc_a_uncalibrated=acc_a0, acc_b_uncalibrated=acc_b0,
    )


def _row_codes(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    if M.size and not np.isin(M, (0, 1)).all():
        raise InvalidParameterError("plug-in estimator needs binary columns")
    weights = 1 << np.arange(M.shape[1], dtype=np.int64)
    return M.astype(np.int64) @ weights


def plugin_cmi_discrete(y, chat_bin, c, max_cells: int = 1 << 16) -> float:
    """Plug-in ``I(y; chat | c)`` from empirical joint frequencies, in nats."""
    y = np.asarray(y, dtype=np.int64)
    chat_bin = np.asarray(chat_bin)
    c = np.asarray(c)
    n = y.shape[0]
    if n == 0:
        raise InvalidParameterError("empty sample")
    kh = 1 if chat_bin.ndim == 1 else chat_bin.shape[1]
    kc = 1 if c.ndim == 1 else c.shape[1]
    n_y = int(y.max()) + 1
    if n_y * (1 << (kh + kc)) > max_cells:
        raise InvalidParameterError(
            f"joint support of {n_y} x 2^{kh + kc} cells exceeds {max_cells}")
    hc = _row_codes(chat_bin)
    cc = _row_codes(c)

    def counts(*codes):
        key = np.zeros(n, dtype=np.int64)
        for code, size in codes:
            key = key * size + code
        _, inverse, cnt = np.unique(key, return_inverse=True, return_counts=True)
        return cnt[inverse].astype(np.float64)

    n_yhc = counts((y, n_y), (hc, 1 << kh), (cc, 1 << kc))
    n_yc = counts((y, n_y), (cc, 1 << kc))
    n_hc = counts((hc, 1 << kh), (cc, 1 << kc))
    n_c = counts((cc, 1 << kc))
    # per-row average of the log ratio equals the sum over cells weighted by p(cell)
    return float(np.mean(np.log(n_yhc * n_c / (n_yc * n_hc))))
