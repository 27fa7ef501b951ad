"""Sweep harness: leakage levels, config grids, seeded cells and CSV tables."""

from __future__ import annotations

import csv
import io
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .classifiers import ClassifierKind
from .leakage import DEFAULT_RATIOS, DegenerateSplitError, measure_leakage, split_dataset
from .numerics import InvalidParameterError, mix_seed
from .synthgen import GenConfig, generate_dataset

CSV_HEADER = ("config_id,n,d,k,J,noise,b,l,classifier,run,h_y_c,h_y_chat_c,leakage,"
              "acc_ga,acc_gb,wall_ms")
CSV_FIELDS = tuple(CSV_HEADER.split(","))

__all__ = [
    "CSV_HEADER", "SweepConfig", "SweepRow", "leakage_levels", "split_dataset", "run_sweep",
    "cell_seed", "rows_to_csv", "read_csv_rows", "summarize_rows", "mean_series",
    "DegenerateSplitError",
]


def leakage_levels(k: int, d: int, l: int = 0, m: int = 30) -> list[int]:
    """``m`` evenly spaced values of ``b`` on ``[k+1, d-k-l-1]``, rounded and deduplicated."""
    lo, hi = k + 1, d - k - l - 1
    if lo > hi:
        raise InvalidParameterError(f"no admissible b for k={k}, d={d}, l={l}")
    if m < 1:
        raise InvalidParameterError("need at least one level")
    if m == 1:
        return [int(round((lo + hi) / 2))]
    raw = np.floor(np.linspace(lo, hi, m) + 0.5).astype(int)
    return [int(b) for b in np.unique(raw)]


def _parse_list(raw: str, conv):
    return tuple(conv(v.strip()) for v in raw.split(",") if v.strip())


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple = (500, 2000, 10000)
    d_values: tuple = (500, 2500)
    k_values: tuple = (50, 200)
    noise_values: tuple = (0.5, 2.0)
    J: int = 5
    kinds: tuple = ("mlp", "rf", "gbt")
    levels: int = 30
    runs: int = 5
    base_seed: int = 0
    l: int = 0
    h: int = 64
    ratios: tuple = DEFAULT_RATIOS

    _LISTS = {"n_values": int, "d_values": int, "k_values": int, "noise_values": float,
              "kinds": str, "ratios": float}

    def validate(self) -> None:
        for name in ("n_values", "d_values", "k_values", "noise_values", "kinds"):
            if not getattr(self, name):
                raise InvalidParameterError(f"{name} must be non-empty")
        for kind in self.kinds:
            ClassifierKind.parse(kind)
        for k in self.k_values:
            for d in self.d_values:
                if not k < d:
                    raise InvalidParameterError(f"k={k} must be below d={d}")
                leakage_levels(k, d, self.l, self.levels)
        if self.runs < 1 or self.levels < 1:
            raise InvalidParameterError("runs and levels must be positive")

    def grid(self):
        for n in self.n_values:
            for d in self.d_values:
                for k in self.k_values:
                    for noise in self.noise_values:
                        yield n, d, k, noise

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(str(v) for v in value)
            out.append(f"{f.name} = {value}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "SweepConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma-separated."""
        scalar = {"J": int, "levels": int, "runs": int, "base_seed": int, "l": int, "h": int}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep or not key:
                raise InvalidParameterError(f"line {lineno}: expected 'key = value'")
            try:
                if key in cls._LISTS:
                    values[key] = _parse_list(raw, cls._LISTS[key])
                elif key in scalar:
                    values[key] = scalar[key](raw)
                else:
                    raise InvalidParameterError(f"line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                if isinstance(exc, InvalidParameterError):
                    raise
                raise InvalidParameterError(f"line {lineno}: bad value for {key}: {raw!r}") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class SweepRow:
    config_id: str
    n: int
    d: int
    k: int
    J: int
    noise: float
    b: int
    l: int
    classifier: str
    run: int
    h_y_c: float = math.nan
    h_y_chat_c: float = math.nan
    leakage: float = math.nan
    acc_ga: float = math.nan
    acc_gb: float = math.nan
    wall_ms: float = 0.0
    seed: int = 0
    error: str = field(default="")


def config_id(n, d, k, noise) -> str:
    return f"n{n}_d{d}_k{k}_noise{noise:g}"


def cell_seed(base_seed, n, d, k, noise, b, kind_index, run) -> int:
    return mix_seed(base_seed, n, d, k, float(noise), b, kind_index, run)


def _cells(sweep: SweepConfig):
    for n, d, k, noise in sweep.grid():
        for b in leakage_levels(k, d, sweep.l, sweep.levels):
            for kind_index, kind in enumerate(sweep.kinds):
                for run in range(sweep.runs):
                    seed = cell_seed(sweep.base_seed, n, d, k, noise, b, kind_index, run)
                    yield SweepRow(config_id(n, d, k, noise), n, d, k, sweep.J, float(noise), b,
                                   sweep.l, ClassifierKind.parse(kind).value, run, seed=seed)


def run_cell(row: SweepRow, h: int = 64, ratios=DEFAULT_RATIOS) -> SweepRow:
    """Generate the cell's dataset and fill in its leakage estimate.

    Failures are recorded on the row rather than raised.
    """
    start = time.perf_counter()
    try:
        cfg = GenConfig.with_noise(row.noise, n=row.n, d=row.d, k=row.k, J=row.J, b=row.b,
                                   l=row.l, h=h, seed=row.seed)
        rep = measure_leakage(generate_dataset(cfg), row.classifier, row.seed, ratios)
        row.h_y_c, row.h_y_chat_c, row.leakage = rep.h_y_given_c, rep.h_y_given_chat_c, rep.leakage
        row.acc_ga, row.acc_gb = rep.acc_a, rep.acc_b
    except Exception as exc:  # noqa: BLE001 - recorded per row, sweep continues
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_ms = (time.perf_counter() - start) * 1000.0
    return row


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(sweep: SweepConfig, jobs: int = 1, progress=None) -> list[SweepRow]:
    """Run every (config, b, classifier, run) cell; rows come back in grid order."""
    sweep.validate()
    cells = list(_cells(sweep))
    args = [(row, sweep.h, sweep.ratios) for row in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, args))
    else:
        results = []
        for a in args:
            results.append(run_cell(*a))
            if progress:
                progress(len(results), len(args))
    return results


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def rows_to_csv(rows, timing: bool = True) -> str:
    """Render rows under the fixed header. ``timing=False`` writes ``wall_ms`` as 0."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for row in rows:
        d = asdict(row) if not isinstance(row, dict) else dict(row)
        if not timing:
            d["wall_ms"] = 0
        buf.write(",".join(_fmt(d[f]) for f in CSV_FIELDS) + "\n")
    return buf.getvalue()


def read_csv_rows(path) -> list[dict]:
    """Load a results CSV; numeric columns become floats, ``classifier`` stays text."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InvalidParameterError(f"{path}: empty CSV")
        out = []
        for rec in reader:
            out.append({k: (v if k in ("config_id", "classifier") else float(v))
                        for k, v in rec.items()})
    return out


def mean_series(rows, x_key: str = "b", group_keys=("config_id",),
                series_key: str = "classifier", value_key: str = "leakage"):
    """Per-panel, per-series mean and min/max band of ``value_key`` over runs.

    Returns ``{panel: {series: [(x, mean, lo, hi), ...]}}`` with x ascending.
    Rows whose value is NaN (failed cells) are skipped.
    """
    bucket = defaultdict(list)
    for r in rows:
        r = asdict(r) if not isinstance(r, dict) else r
        v = float(r[value_key])
        if math.isnan(v):
            continue
        panel = tuple(r[g] for g in group_keys)
        bucket[(panel, r[series_key], float(r[x_key]))].append(v)
    out = defaultdict(lambda: defaultdict(list))
    for (panel, series, x), vals in sorted(bucket.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1]), kv[0][2])):
        out[panel][series].append((x, float(np.mean(vals)), float(min(vals)), float(max(vals))))
    return {p: dict(s) for p, s in out.items()}


def summarize_rows(rows) -> dict:
    """Counts for the run manifest, including negative leakage estimates."""
    negatives = [r for r in rows if not r.error and r.leakage < 0]
    return {
        "rows": len(rows),
        "errors": sum(1 for r in rows if r.error),
        "negative_leakage_rows": len(negatives),
        "negative_leakage_cells": [
            {"config_id": r.config_id, "b": r.b, "classifier": r.classifier, "run": r.run,
             "leakage": r.leakage} for r in negatives],
        "error_cells": [
            {"config_id": r.config_id, "b": r.b, "classifier": r.classifier, "run": r.run,
             "error": r.error} for r in rows if r.error],
    }
