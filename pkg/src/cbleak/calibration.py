"""Temperature scaling on probability outputs.

Every classifier here emits probabilities, so the logits being rescaled are
``ln p`` after clamping. ``softmax(ln p / T)`` is a strictly monotone
transform of each row and never changes its argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import EPS, InvalidParameterError, log_softmax

T_MIN, T_MAX = 0.05, 20.0
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CalibrationResult:
    temperature: float
    nll_before: float
    nll_after: float


def _pseudo_logits(probs):
    return np.log(np.clip(np.asarray(probs, dtype=np.float64), EPS, 1.0))


def temperature_nll(logits: np.ndarray, labels: np.ndarray, T: float) -> float:
    """Mean NLL of ``softmax(logits / T)``."""
    lp = log_softmax(logits / T, axis=1)
    p_true = np.exp(lp[np.arange(len(labels)), labels])
    return float(-np.log(np.maximum(p_true, EPS)).mean())


def golden_section(fn, lo: float, hi: float, tol: float = 1e-4) -> float:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


def fit_temperature(probs, labels, lo: float = T_MIN, hi: float = T_MAX,
                    tol: float = 1e-4) -> CalibrationResult:
    """Find the temperature minimizing validation NLL.

    Falls back to ``T = 1`` if the search lands on a worse point, so the
    returned NLL never exceeds the uncalibrated one.
    """
    labels = np.asarray(labels, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise InvalidParameterError("calibration needs a non-empty validation set")
    if labels.shape != (probs.shape[0],):
        raise InvalidParameterError("one label per probability row required")
    logits = _pseudo_logits(probs)
    before = temperature_nll(logits, labels, 1.0)
    T = golden_section(lambda t: temperature_nll(logits, labels, t), lo, hi, tol)
    after = temperature_nll(logits, labels, T)
    if after > before:
        T, after = 1.0, before
    return CalibrationResult(float(T), before, after)


def apply_temperature(probs, T: float) -> np.ndarray:
    """``softmax(ln(clamp(p)) / T)`` row-wise."""
    if not T > 0:
        raise InvalidParameterError(f"temperature must be positive, got {T}")
    logits = _pseudo_logits(probs)
    return np.exp(log_softmax(logits / T, axis=-1))


def calibrate(model, X_val, y_val) -> CalibrationResult:
    """Fit and install a temperature on ``model`` using a validation split."""
    result = fit_temperature(model.uncalibrated_proba(X_val), y_val)
    model.temperature = result.temperature
    return result
