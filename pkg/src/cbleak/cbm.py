"""Joint soft concept bottleneck model and the lambda sweep built on it.

The encoder maps features to concept probabilities and the head maps those
probabilities, and nothing else, to class logits. Joint training minimizes
``CE(head) + lambda * mean BCE(encoder, c)``.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field

import numpy as np

from .classifiers import ClassifierKind
from .classifiers.mlp import Adam, init_dense
from .leakage import DEFAULT_RATIOS, measure_leakage, split_dataset
from .numerics import (
    InvalidParameterError,
    RngStream,
    log_softmax,
    mix_seed,
    sigmoid_raw,
    sigmoid_vec,
    softmax_vec,
)
from .synthgen import Dataset, GenConfig, generate_dataset

DEFAULT_LAMBDAS = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss in epoch {epoch}")
        self.epoch = epoch


@dataclass
class CbmModel:
    params: dict
    lam: float
    encoder_hidden: int
    head_hidden: int
    seed: int
    epoch_loss: list = field(default_factory=list)

    @property
    def n_concepts(self) -> int:
        return self.params["We2"].shape[1]


ENCODER_KEYS = ("We1", "be1", "We2", "be2")
HEAD_KEYS = ("Wh1", "bh1", "Wh2", "bh2")


def init_cbm_params(rng, d, k, J, encoder_hidden=256, head_hidden=64) -> dict:
    We1, be1 = init_dense(rng, d, encoder_hidden)
    We2, be2 = init_dense(rng, encoder_hidden, k)
    Wh1, bh1 = init_dense(rng, k, head_hidden)
    Wh2, bh2 = init_dense(rng, head_hidden, J)
    return dict(We1=We1, be1=be1, We2=We2, be2=be2, Wh1=Wh1, bh1=bh1, Wh2=Wh2, bh2=bh2)


def encode(params, X):
    """Concept logits and probabilities from features."""
    hidden = np.maximum(X @ params["We1"] + params["be1"], 0.0)
    z = hidden @ params["We2"] + params["be2"]
    return z, sigmoid_raw(z)


def head_logits(params, concepts):
    hidden = np.maximum(concepts @ params["Wh1"] + params["bh1"], 0.0)
    return hidden @ params["Wh2"] + params["bh2"]


def joint_loss_and_grads(params: dict, X, C, y, lam: float):
    """Joint loss on a batch and its gradient for every parameter.

    Concept BCE is evaluated in logit form, ``softplus(z) - c z``, whose
    derivative in ``z`` is exactly ``sigmoid(z) - c``.
    """
    n, k = C.shape
    rows = np.arange(n)
    pre1 = X @ params["We1"] + params["be1"]
    a1 = np.maximum(pre1, 0.0)
    z = a1 @ params["We2"] + params["be2"]
    chat = sigmoid_raw(z)
    pre2 = chat @ params["Wh1"] + params["bh1"]
    a2 = np.maximum(pre2, 0.0)
    logits = a2 @ params["Wh2"] + params["bh2"]

    task = -log_softmax(logits, axis=1)[rows, y].mean()
    bce = (np.logaddexp(0.0, z) - C * z).mean()
    loss = task + lam * bce

    d_logits = softmax_vec(logits, axis=1)
    d_logits[rows, y] -= 1.0
    d_logits /= n
    d_a2 = (d_logits @ params["Wh2"].T) * (pre2 > 0)
    d_chat = d_a2 @ params["Wh1"].T
    d_z = d_chat * chat * (1.0 - chat) + lam * (chat - C) / (n * k)
    d_a1 = (d_z @ params["We2"].T) * (pre1 > 0)
    grads = {
        "Wh2": a2.T @ d_logits, "bh2": d_logits.sum(axis=0),
        "Wh1": chat.T @ d_a2, "bh1": d_a2.sum(axis=0),
        "We2": a1.T @ d_z, "be2": d_z.sum(axis=0),
        "We1": X.T @ d_a1, "be1": d_a1.sum(axis=0),
    }
    return float(loss), float(task), float(bce), grads


def train_joint_cbm(ds: Dataset, lam: float, epochs: int = 20, batch: int = 64,
                    stream: RngStream | None = None, train_idx=None,
                    encoder_hidden: int = 256, head_hidden: int = 64,
                    lr: float = 1e-3) -> CbmModel:
    """Train encoder and head jointly by mini-batch Adam on ``train_idx`` rows."""
    if lam < 0:
        raise InvalidParameterError(f"lambda must be non-negative, got {lam}")
    stream = stream or RngStream(ds.config.seed, "cbm")
    rng = stream.generator()
    idx = np.arange(ds.n) if train_idx is None else np.asarray(train_idx)
    X = ds.X[idx]
    C = ds.C[idx].astype(np.float64)
    y = ds.Y[idx]
    params = init_cbm_params(rng, X.shape[1], C.shape[1], ds.config.J,
                             encoder_hidden, head_hidden)
    opt = Adam(params, lr=lr)
    model = CbmModel(params, lam, encoder_hidden, head_hidden, stream.seed)
    n = len(idx)
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            b = perm[start:start + batch]
            loss, _, _, grads = joint_loss_and_grads(params, X[b], C[b], y[b], lam)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            opt.step(grads)
            total += loss * len(b)
        model.epoch_loss.append(total / n)
    return model


def cbm_predict_concepts(model: CbmModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.params["We1"].shape[0]:
        raise InvalidParameterError(
            f"expected {model.params['We1'].shape[0]} feature columns, got {X.shape}")
    z, _ = encode(model.params, X)
    return sigmoid_vec(z)


def cbm_predict_proba(model: CbmModel, X) -> np.ndarray:
    _, chat = encode(model.params, np.asarray(X, dtype=np.float64))
    return softmax_vec(head_logits(model.params, chat), axis=1)


@dataclass(frozen=True)
class LambdaRow:
    lam: float
    k: int
    run: int
    n: int
    d: int
    J: int
    b: int
    l: int
    classifier: str
    h_y_c: float
    h_y_chat_c: float
    leakage: float
    acc_ga: float
    acc_gb: float
    cbm_task_acc: float
    cbm_concept_acc: float
    synthetic_leakage: float


LAMBDA_CSV_HEADER = ("lambda,k,run,n,d,J,b,l,classifier,h_y_c,h_y_chat_c,leakage,acc_ga,acc_gb,"
                     "cbm_task_acc,cbm_concept_acc,synthetic_leakage")


def lambda_rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(LAMBDA_CSV_HEADER + "\n")
    for row in rows:
        buf.write(",".join(f"{v:.6g}" if isinstance(v, float) else str(v)
                           for v in astuple(row)) + "\n")
    return buf.getvalue()


def _sweep_cell(cfg, k, run, lambdas, kind, epochs, batch, ratios, hyper):
    seed = mix_seed(cfg.seed, "cbm-sweep", k, run)
    ds = generate_dataset(GenConfig(**{**cfg.__dict__, "k": int(k), "seed": seed}))
    split = split_dataset(ds.n, ratios, seed)
    base = measure_leakage(ds, kind, seed, ratios, hyper, split=split)
    rows = []
    te = split.test
    for lam in lambdas:
        model = train_joint_cbm(ds, float(lam), epochs, batch,
                                RngStream(seed, f"cbm-lambda-{float(lam)!r}"),
                                train_idx=split.train)
        chat = cbm_predict_concepts(model, ds.X)
        rep = measure_leakage(ds.with_chat(chat), kind, seed, ratios, hyper, split=split)
        task_acc = float(np.mean(np.argmax(cbm_predict_proba(model, ds.X[te]), 1) == ds.Y[te]))
        concept_acc = float(np.mean((chat[te] > 0.5) == ds.C[te].astype(bool)))
        rows.append(LambdaRow(
            float(lam), int(k), run, cfg.n, cfg.d, cfg.J, cfg.b, cfg.l, kind.value,
            rep.h_y_given_c, rep.h_y_given_chat_c, rep.leakage, rep.acc_a, rep.acc_b,
            task_acc, concept_acc, base.leakage))
    return rows


def lambda_sweep(cfg: GenConfig, lambdas, k_values, kind=ClassifierKind.GBT, runs: int = 3,
                 epochs: int = 20, batch: int = 64, ratios=DEFAULT_RATIOS,
                 hyper: dict | None = None, jobs: int = 1) -> list[LambdaRow]:
    """Leakage of jointly trained CBM concepts across lambda and concept count.

    Each ``(k, run)`` pair draws one dataset that every lambda reuses, so the
    lambda comparison is paired. The CBM trains on the training split only;
    the leakage estimate reuses the same split. ``synthetic_leakage`` is the
    estimate on the generator's own ``chat`` for the same data.
    """
    lambdas, k_values = list(lambdas), list(k_values)
    if not lambdas or not k_values or runs < 1:
        raise InvalidParameterError("lambda grid, k grid and runs must be non-empty")
    kind = ClassifierKind.parse(kind)
    cells = [(cfg, k, run, lambdas, kind, epochs, batch, ratios, hyper)
             for k in k_values for run in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, *zip(*cells)))
    else:
        results = [_sweep_cell(*c) for c in cells]
    rows = [r for chunk in results for r in chunk]
    rows.sort(key=lambda r: (lambdas.index(r.lam), k_values.index(r.k), r.run))
    return rows
