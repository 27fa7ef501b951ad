"""Fully synthetic concept data with a controllable leakage channel.

Features ``x ~ N(0, sigma_x^2 I)`` feed two disjoint random projections:
``A`` reads the first ``b`` features and drives the ground-truth concepts,
``B`` reads features ``b+1 .. d-l`` and produces the leakage term that is
mixed into the estimated concepts and into the target.
"""

from __future__ import annotations

import io
import struct
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .numerics import (
    InvalidParameterError,
    RngStream,
    sample_gaussian,
    sigmoid_vec,
    softmax_vec,
)

MAGIC = b"CBLK"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GenConfig:
    n: int = 2000
    d: int = 500
    k: int = 50
    J: int = 5
    b: int = 100
    l: int = 0
    h: int = 64
    sigma_x: float = 1.0
    sigma_c: float = 0.5 ** 0.5
    sigma_chat: float = 0.5 ** 0.5
    sigma_y: float = 0.5 ** 0.5
    seed: int = 0

    @classmethod
    def with_noise(cls, noise: float, **kwargs) -> "GenConfig":
        """Build a config whose three noise terms share the diagonal variance ``noise``."""
        if noise < 0:
            raise InvalidParameterError(f"noise variance must be >= 0, got {noise}")
        s = float(noise) ** 0.5
        return cls(sigma_c=s, sigma_chat=s, sigma_y=s, **kwargs)

    def validate(self) -> None:
        if self.n < 1 or self.k < 1 or self.h < 1 or self.d < 1:
            raise InvalidParameterError("n, d, k and h must be positive")
        if self.J < 2:
            raise InvalidParameterError("J must be at least 2")
        if not 0 <= self.b <= self.d:
            raise InvalidParameterError(f"b={self.b} outside [0, d={self.d}]")
        if not 0 <= self.l <= self.d - self.b:
            raise InvalidParameterError(f"l={self.l} outside [0, d-b={self.d - self.b}]")
        for name in ("sigma_x", "sigma_c", "sigma_chat", "sigma_y"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be non-negative")

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)!r}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "GenConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in types:
                raise InvalidParameterError(f"unknown GenConfig key {key!r}")
            conv = int if types[key] in (int, "int") else float
            values[key] = conv(raw.strip())
        return cls(**values)


@dataclass(frozen=True)
class LabelMlp:
    """One-hidden-layer ReLU network mapping ``[c; leak]`` to class logits."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def random(cls, k: int, h: int, J: int, stream: RngStream) -> "LabelMlp":
        rng = stream.generator()
        W1 = rng.standard_normal((h, 2 * k))
        W2 = rng.standard_normal((J, h))
        return cls(W1, np.zeros(h), W2, np.zeros(J))


def label_mlp_forward(f: LabelMlp, c: np.ndarray, leak: np.ndarray) -> np.ndarray:
    """Logits ``W2 relu(W1 [c; leak] + b1) + b2``; accepts a single row or a batch."""
    c = np.asarray(c, dtype=np.float64)
    leak = np.asarray(leak, dtype=np.float64)
    if c.shape != leak.shape or c.shape[-1] * 2 != f.W1.shape[1]:
        raise InvalidParameterError(
            f"concept/leak shapes {c.shape}, {leak.shape} do not match W1 {f.W1.shape}")
    z = np.concatenate([c, leak], axis=-1)
    hidden = np.maximum(z @ f.W1.T + f.b1, 0.0)
    return hidden @ f.W2.T + f.b2


def build_projection_A(cfg: GenConfig, stream: RngStream) -> np.ndarray:
    A = np.zeros((cfg.k, cfg.d))
    if cfg.b > 0:
        A[:, : cfg.b] = stream.generator().standard_normal((cfg.k, cfg.b))
    return A


def build_projection_B(cfg: GenConfig, stream: RngStream) -> np.ndarray:
    B = np.zeros((cfg.k, cfg.d))
    width = cfg.d - cfg.b - cfg.l
    if width > 0:
        B[:, cfg.b: cfg.d - cfg.l] = stream.generator().standard_normal((cfg.k, width))
    return B


def sample_categorical(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw per row; returns 0-based class indices."""
    cdf = np.cumsum(probs, axis=1)
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


@dataclass(frozen=True)
class Dataset:
    """Generated sample.

    ``Y`` holds 0-based class indices; the binary file format stores them
    1-based.
    """

    X: np.ndarray
    C: np.ndarray
    Chat: np.ndarray
    L: np.ndarray
    Y: np.ndarray
    config: GenConfig
    A: np.ndarray
    B: np.ndarray
    f: LabelMlp
    pi: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def with_chat(self, chat: np.ndarray) -> "Dataset":
        chat = np.asarray(chat, dtype=np.float64)
        if chat.shape[0] != self.n:
            raise InvalidParameterError("replacement Chat must have one row per observation")
        return replace(self, Chat=chat)


def _streams(seed: int) -> dict[str, RngStream]:
    names = ("A", "B", "f", "features", "concept-noise", "concept-draw",
             "chat-noise", "target-noise", "target-draw")
    return {name: RngStream(seed, name) for name in names}


def generate_dataset(cfg: GenConfig) -> Dataset:
    cfg.validate()
    s = _streams(cfg.seed)
    n, k, J = cfg.n, cfg.k, cfg.J
    A = build_projection_A(cfg, s["A"])
    B = build_projection_B(cfg, s["B"])
    f = LabelMlp.random(k, cfg.h, J, s["f"])

    X = sample_gaussian(s["features"], (n, cfg.d), 0.0, cfg.sigma_x)
    AX = X @ A.T
    L = X @ B.T
    pi = sigmoid_vec(AX + sample_gaussian(s["concept-noise"], (n, k), 0.0, cfg.sigma_c))
    C = (s["concept-draw"].generator().random((n, k)) < pi).astype(np.uint8)
    Chat = sigmoid_vec(AX + L + sample_gaussian(s["chat-noise"], (n, k), 0.0, cfg.sigma_chat))
    logits = label_mlp_forward(f, C.astype(np.float64), L)
    logits = logits + sample_gaussian(s["target-noise"], (n, J), 0.0, cfg.sigma_y)
    P = softmax_vec(logits, axis=1)
    Y = sample_categorical(P, s["target-draw"].generator().random(n))
    return Dataset(X=X, C=C, Chat=Chat, L=L, Y=Y.astype(np.int64), config=cfg,
                   A=A, B=B, f=f, pi=pi)


def dump_dataset(ds: Dataset, path) -> None:
    cfg = ds.config
    n, d = ds.X.shape
    k = ds.C.shape[1]
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<4Q", n, d, k, cfg.J))
    buf.write(np.ascontiguousarray(ds.X, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(ds.C, dtype="u1").tobytes())
    buf.write(np.ascontiguousarray(ds.Chat, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(ds.L, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(ds.Y + 1, dtype="<u4").tobytes())
    text = cfg.to_text().encode("utf-8")
    buf.write(struct.pack("<Q", len(text)))
    buf.write(text)
    Path(path).write_bytes(buf.getvalue())


def load_dataset(path) -> Dataset:
    """Read a dataset file; projections and label MLP are rebuilt from the stored seed."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise InvalidParameterError(f"{path}: not a dataset file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise InvalidParameterError(f"{path}: unsupported format version {version}")
    n, d, k, J = struct.unpack_from("<4Q", raw, 8)
    off = 40

    def take(dtype, count, shape):
        nonlocal off
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr.reshape(shape).astype(dtype.lstrip("<"), copy=True)

    try:
        X = take("<f8", n * d, (n, d))
        C = take("u1", n * k, (n, k))
        Chat = take("<f8", n * k, (n, k))
        L = take("<f8", n * k, (n, k))
        Y = take("<u4", n, (n,)).astype(np.int64) - 1
        (tlen,) = struct.unpack_from("<Q", raw, off)
        text = raw[off + 8: off + 8 + tlen].decode("utf-8")
    except (ValueError, struct.error) as exc:
        raise InvalidParameterError(f"{path}: truncated dataset file") from exc
    cfg = GenConfig.from_text(text)
    if (cfg.n, cfg.d, cfg.k, cfg.J) != (n, d, k, J):
        raise InvalidParameterError(f"{path}: header does not match stored config")
    s = _streams(cfg.seed)
    return Dataset(X=X, C=C, Chat=Chat, L=L, Y=Y, config=cfg,
                   A=build_projection_A(cfg, s["A"]), B=build_projection_B(cfg, s["B"]),
                   f=LabelMlp.random(k, cfg.h, J, s["f"]))


def config_dict(cfg: GenConfig) -> dict:
    return asdict(cfg)
