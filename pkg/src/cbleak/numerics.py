"""Seeded random streams and numerically stable transforms.

Every random draw in the package goes through :func:`rng_stream`, which
derives an independent :class:`numpy.random.Generator` from a base seed and
a short text label. Two streams with the same ``(seed, label)`` produce the
same sequence; different labels give statistically independent streams.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

EPS = 1e-12


class InvalidParameterError(ValueError):
    """Raised when an argument violates a documented precondition."""


def _label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """A named random stream derived from a 64-bit seed."""

    seed: int
    label: str

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, _label_key(self.label)])
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}")


def rng_stream(seed: int, label: str) -> np.random.Generator:
    return RngStream(seed, label).generator()


def mix_seed(*parts) -> int:
    """Stable 64-bit hash of a tuple of seed coordinates."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def sample_gaussian(stream: RngStream | np.random.Generator, size, mean: float = 0.0,
                    std: float = 1.0) -> np.ndarray:
    """Draw i.i.d. normal samples.

    ``size`` may be an int or a shape tuple. ``std == 0`` returns the constant
    ``mean`` without consuming the stream.
    """
    if std < 0:
        raise InvalidParameterError(f"std must be non-negative, got {std}")
    shape = (size,) if np.isscalar(size) else tuple(size)
    if any(s < 0 for s in shape):
        raise InvalidParameterError(f"invalid sample shape {shape}")
    if std == 0:
        return np.full(shape, float(mean))
    rng = stream.generator() if isinstance(stream, RngStream) else stream
    return rng.normal(mean, std, size=shape)


def sigmoid_raw(z):
    """Overflow-safe logistic function without clamping."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_vec(z):
    """Logistic function clamped to ``[EPS, 1 - EPS]``."""
    return np.clip(sigmoid_raw(z), EPS, 1.0 - EPS)


def log_softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax_vec(z, axis=-1):
    """Max-subtracted softmax along ``axis``."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - np.max(z, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def clipped_neg_log(p):
    """``-ln(max(p, EPS))`` for probabilities in ``[0, 1]``."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise InvalidParameterError("probabilities must lie in [0, 1]")
    out = -np.log(np.maximum(arr, EPS))
    return float(out) if out.ndim == 0 else out


def clamp_renormalize(probs: np.ndarray) -> np.ndarray:
    """Clamp rows into ``[EPS, 1 - EPS]`` and rescale them to sum to one."""
    p = np.clip(np.asarray(probs, dtype=np.float64), EPS, 1.0 - EPS)
    return p / p.sum(axis=-1, keepdims=True)
