"""``cbleak`` command line: generate, measure, sweep, cbm-sweep, plot.

Exit status is 0 on success, 1 for invalid arguments or inputs and 2 for
failures while running.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .classifiers import ClassifierKind
from .numerics import InvalidParameterError
from .synthgen import GenConfig, dump_dataset, generate_dataset, load_dataset

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _env_seed() -> int:
    raw = os.environ.get("CBLEAK_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CBLEAK_SEED must be an integer, got {raw!r}") from None


def read_kv_file(path) -> dict[str, str]:
    """Flat ``key = value`` file with ``#`` comments."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_").lower()] = value.strip()
    return out


def _parse_list(raw, conv) -> tuple:
    try:
        values = tuple(conv(v) for v in str(raw).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"malformed list {raw!r}") from None
    if not values:
        raise UsageError("empty list")
    return values


def _int_list(raw: str) -> tuple:
    return _parse_list(raw, int)


def _float_list(raw: str) -> tuple:
    return _parse_list(raw, float)


GEN_DEFAULTS = dict(n=2000, d=500, k=50, j=5, b=100, l=0, noise=0.5, h=64)
CBM_DEFAULTS = dict(n=10000, d=1000, k="16,32,64", j=5, b=160, l=0, noise=0.5, h=64)


def _add_gen_flags(p, defaults, k_list=False):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--n", type=int, help=f"observations (default {defaults['n']})")
    p.add_argument("--d", type=int, help=f"feature dimension (default {defaults['d']})")
    if k_list:
        p.add_argument("--k", help=f"comma-separated concept counts (default {defaults['k']})")
    else:
        p.add_argument("--k", type=int, help=f"concepts (default {defaults['k']})")
    p.add_argument("--j", type=int, help=f"classes (default {defaults['j']})")
    p.add_argument("--b", type=int, help=f"features feeding the concepts (default {defaults['b']})")
    p.add_argument("--l", type=int, help=f"trailing features kept out of leakage (default {defaults['l']})")
    p.add_argument("--noise", type=float, help=f"shared noise variance (default {defaults['noise']})")
    p.add_argument("--h", type=int, help=f"label MLP hidden width (default {defaults['h']})")
    p.add_argument("--seed", type=int, help="base seed (default $CBLEAK_SEED or 0)")


def _resolve(args, defaults, keys) -> dict:
    """Merge defaults < config file < flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        from_file = read_kv_file(args.config)
        unknown = set(from_file) - set(keys)
        if unknown:
            raise UsageError(f"{args.config}: unknown keys {sorted(unknown)}")
        merged.update(from_file)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if merged.get("seed") is None:
        merged["seed"] = _env_seed()
    return merged


def _gen_config(values: dict, k=None) -> GenConfig:
    try:
        return GenConfig.with_noise(
            float(values["noise"]), n=int(values["n"]), d=int(values["d"]),
            k=int(values["k"] if k is None else k), J=int(values["j"]), b=int(values["b"]),
            l=int(values["l"]), h=int(values["h"]), seed=int(values["seed"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"malformed generator settings: {exc}") from None


def write_manifest(output: Path, subcommand: str, config: dict, seed, inputs=(), outputs=(),
                   summary=None, argv=None) -> Path:
    manifest = {
        "tool": "cbleak",
        "version": __version__,
        "subcommand": subcommand,
        "argv": list(argv or []),
        "config": config,
        "base_seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    if summary is not None:
        manifest["summary"] = summary
    path = Path(str(output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    return path


def _cmd_generate(args, argv):
    values = _resolve(args, GEN_DEFAULTS, ("n", "d", "k", "j", "b", "l", "noise", "h", "seed"))
    cfg = _gen_config(values)
    ds = generate_dataset(cfg)
    out = Path(args.out)
    dump_dataset(ds, out)
    write_manifest(out, "generate", {**asdict(cfg), "noise": float(values["noise"])},
                   cfg.seed, outputs=[out], argv=argv)
    print(f"wrote {out} (n={cfg.n}, d={cfg.d}, k={cfg.k}, b={cfg.b}, l={cfg.l})")


def _cmd_measure(args, argv):
    from .experiments import SweepRow, config_id, rows_to_csv
    from .leakage import measure_leakage

    if args.data:
        try:
            ds = load_dataset(args.data)
        except FileNotFoundError:
            raise UsageError(f"no such dataset file: {args.data}") from None
        values = {"noise": ds.config.sigma_c ** 2}
        split_seed = args.seed if args.seed is not None else _env_seed()
    else:
        values = _resolve(args, GEN_DEFAULTS, ("n", "d", "k", "j", "b", "l", "noise", "h", "seed"))
        ds = generate_dataset(_gen_config(values))
        split_seed = ds.config.seed
    kind = ClassifierKind.parse(args.classifier)
    rep = measure_leakage(ds, kind, split_seed)
    cfg = ds.config
    noise = float(values["noise"])
    row = SweepRow(config_id(cfg.n, cfg.d, cfg.k, noise), cfg.n, cfg.d, cfg.k, cfg.J, noise,
                   cfg.b, cfg.l, kind.value, 0, rep.h_y_given_c, rep.h_y_given_chat_c,
                   rep.leakage, rep.acc_a, rep.acc_b, 0.0)
    print(rep.pretty())
    text = rows_to_csv([row], timing=False)
    print(text.rstrip("\n"))
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        write_manifest(out, "measure", {**asdict(cfg), "classifier": kind.value,
                                        "split_seed": split_seed},
                       split_seed, inputs=[args.data] if args.data else [], outputs=[out],
                       summary={"leakage": rep.leakage, "negative": rep.leakage < 0},
                       argv=argv)


def _cmd_sweep(args, argv):
    from .experiments import SweepConfig, rows_to_csv, run_sweep, summarize_rows

    overrides = {
        "n_values": _int_list(args.n) if args.n else None,
        "d_values": _int_list(args.d) if args.d else None,
        "k_values": _int_list(args.k) if args.k else None,
        "noise_values": _float_list(args.noise) if args.noise else None,
        "kinds": tuple(v.strip() for v in args.classifier.split(",")) if args.classifier else None,
        "J": args.j, "levels": args.levels, "runs": args.runs, "l": args.l,
        "base_seed": args.seed,
    }
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    file_keys = {line.split("#", 1)[0].partition("=")[0].strip() for line in text.splitlines()}
    if args.seed is None and "base_seed" not in file_keys:
        overrides["base_seed"] = _env_seed()
    sweep = SweepConfig.from_text(text, **overrides)
    sweep.validate()

    def progress(done, total):
        print(f"\r{done}/{total} cells", end="", file=sys.stderr, flush=True)

    rows = run_sweep(sweep, jobs=args.jobs, progress=progress if args.progress else None)
    if args.progress:
        print(file=sys.stderr)
    out = Path(args.out)
    out.write_text(rows_to_csv(rows, timing=not args.no_timing), encoding="utf-8")
    summary = summarize_rows(rows)
    config = {f.name: getattr(sweep, f.name) for f in fields(sweep)}
    write_manifest(out, "sweep", config, sweep.base_seed,
                   inputs=[args.config] if args.config else [], outputs=[out],
                   summary=summary, argv=argv)
    print(f"wrote {out}: {summary['rows']} rows, {summary['negative_leakage_rows']} negative "
          f"leakage estimates, {summary['errors']} errors")


def _cmd_cbm_sweep(args, argv):
    from .cbm import DEFAULT_LAMBDAS, lambda_rows_to_csv, lambda_sweep

    values = _resolve(args, CBM_DEFAULTS, ("n", "d", "k", "j", "b", "l", "noise", "h", "seed"))
    k_values = _int_list(values["k"])
    lambdas = _float_list(args.lambda_grid) if args.lambda_grid else DEFAULT_LAMBDAS
    cfg = _gen_config(values, k=k_values[0] if k_values else 1)
    rows = lambda_sweep(cfg, lambdas, k_values, args.classifier, runs=args.runs,
                        epochs=args.epochs, jobs=args.jobs)
    out = Path(args.out)
    out.write_text(lambda_rows_to_csv(rows), encoding="utf-8")
    cfg_dict = {key: v for key, v in asdict(cfg).items() if key != "k"}
    write_manifest(out, "cbm-sweep", {**cfg_dict, "k_values": list(k_values),
                                      "lambdas": list(lambdas), "runs": args.runs,
                                      "classifier": args.classifier, "epochs": args.epochs},
                   cfg.seed, outputs=[out], argv=argv,
                   summary={"rows": len(rows),
                            "negative_leakage_rows": sum(r.leakage < 0 for r in rows)})
    print(f"wrote {out}: {len(rows)} rows")


def _cmd_plot(args, argv):
    from .experiments import read_csv_rows
    from .plotting import plot_results

    try:
        rows = read_csv_rows(args.input)
    except FileNotFoundError:
        raise UsageError(f"no such results file: {args.input}") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(f"malformed results CSV {args.input}: {exc}") from None
    written = plot_results(rows, args.out)
    for path in written:
        write_manifest(path, "plot", {"input": str(args.input)}, None,
                       inputs=[args.input], outputs=[path], argv=argv)
        print(f"wrote {path}")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="cbleak", description="Leakage measurement for concept bottleneck models.",
                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"cbleak {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic dataset file", formatter_class=fmt)
    _add_gen_flags(p, GEN_DEFAULTS)
    p.add_argument("--out", required=True, help="dataset file to write")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("measure", help="estimate leakage on one dataset", formatter_class=fmt)
    _add_gen_flags(p, GEN_DEFAULTS)
    p.add_argument("--data", help="dataset file (otherwise generate from flags)")
    p.add_argument("--classifier", default="gbt", choices=["mlp", "rf", "gbt"],
                   help="entropy estimator")
    p.add_argument("--out", help="optional CSV file for the result row")
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("sweep", help="run a leakage-level sweep", formatter_class=fmt)
    p.add_argument("--config", help="sweep config file (key = value)")
    p.add_argument("--n", help="comma-separated observation counts (default 500,2000,10000)")
    p.add_argument("--d", help="comma-separated feature dimensions (default 500,2500)")
    p.add_argument("--k", help="comma-separated concept counts (default 50,200)")
    p.add_argument("--j", type=int, help="classes (default 5)")
    p.add_argument("--l", type=int, help="trailing features kept out of leakage (default 0)")
    p.add_argument("--noise", help="comma-separated noise variances (default 0.5,2)")
    p.add_argument("--classifier", help="comma-separated kinds from mlp,rf,gbt (default all)")
    p.add_argument("--levels", type=int, help="b levels per config (default 30)")
    p.add_argument("--runs", type=int, help="runs per cell (default 5)")
    p.add_argument("--seed", type=int, help="base seed (default $CBLEAK_SEED or 0)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 so identical seeds give identical bytes")
    p.add_argument("--progress", action="store_true", help="report progress on stderr")
    p.add_argument("--out", required=True, help="results CSV to write")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("cbm-sweep", help="joint CBM lambda sweep", formatter_class=fmt)
    _add_gen_flags(p, CBM_DEFAULTS, k_list=True)
    p.add_argument("--lambda-grid", help="comma-separated lambdas (default 0.01,0.1,0.5,1,2,5,10)")
    p.add_argument("--runs", type=int, default=3, help="runs per (lambda, k)")
    p.add_argument("--epochs", type=int, default=20, help="CBM training epochs")
    p.add_argument("--classifier", default="gbt", choices=["mlp", "rf", "gbt"],
                   help="entropy estimator")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--out", required=True, help="results CSV to write")
    p.set_defaults(func=_cmd_cbm_sweep)

    p = sub.add_parser("plot", help="render results CSV as SVG panels", formatter_class=fmt)
    p.add_argument("--input", required=True, help="results CSV from sweep or cbm-sweep")
    p.add_argument("--out", required=True, help="directory for SVG files")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.func(args, argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
