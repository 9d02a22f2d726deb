"""Command-line entry point.

Verbs: ``corrupt``, ``train``, ``impute``, ``experiment``, ``evaluate``.
Exit codes: 0 on success, 2 for user or configuration errors, 3 for
numeric failures (divergence, degenerate statistics).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import load_experiment, load_registry, lookup, output_dir
from .errors import ConfigError, DaemaError, DimensionError, ExperimentError, NumericError, ParseError
from .evalharness import MECHANISMS, corrupt, fmt, nrms, run_experiment
from .modelio import load_model, save_model
from .model import impute
from .pipeline import fit_norm_stats, load_csv
from .training import TrainConfig, new_model, train

log = logging.getLogger("daema")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    return rows[0], rows[1:]


def _cell(value) -> str:
    return "NA" if math.isnan(value) else fmt(value)


def _label_tokens(ds):
    if ds.label is None:
        return None
    if ds.task == "classification":
        return ["NA" if i < 0 else ds.classes[i] for i in ds.label]
    return [_cell(v) for v in ds.label]


def _registry(args):
    return load_registry(args.registry, args.data_dir)


def cmd_corrupt(args) -> int:
    ds = lookup(_registry(args), args.dataset).load()
    corrupted, mask, pair = corrupt(ds, args.mechanism, args.rate, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels = _label_tokens(ds)
    header = list(ds.feature_names) + ([ds.label_name] if labels is not None else [])

    def rows(X):
        for i, row in enumerate(X):
            yield [_cell(v) for v in row] + ([labels[i]] if labels is not None else [])

    _write_csv(out / "observed.csv", header, rows(corrupted.features))
    _write_csv(out / "truth.csv", header, rows(ds.features))
    _write_csv(out / "mask.csv", ds.feature_names, mask.astype(np.uint8).tolist())
    manifest = {
        "dataset": args.dataset,
        "mechanism": args.mechanism,
        "rate": args.rate,
        "seed": args.seed,
        "rows": ds.n,
        "features": ds.d,
        "label": ds.label_name,
        "missing_cells": int(mask.sum()),
        "mnar_features": None if pair is None else list(pair),
        "mnar_feature_names": None if pair is None else [ds.feature_names[j] for j in pair],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}/observed.csv, mask.csv, truth.csv ({int(mask.sum())} missing cells)")
    return 0


def _train_config(args) -> TrainConfig:
    base = load_experiment(args.config).train.__dict__ if args.config else {}
    overrides = {
        "steps": args.steps, "lr": args.lr, "batch_size": args.batch_size,
        "artificial_rate": args.artificial_rate, "sampling": args.sampling,
    }
    merged = {**base, **{k: v for k, v in overrides.items() if v is not None}, "seed": args.seed}
    if "checkpoints" in merged and merged["checkpoints"] and merged["checkpoints"][-1] > merged.get("steps", 40000):
        merged["checkpoints"] = None
    return TrainConfig(**merged)


def cmd_train(args) -> int:
    if (args.dataset is None) == (args.input is None):
        raise ConfigError("give exactly one of --dataset or --input")
    if args.dataset is not None:
        ds = lookup(_registry(args), args.dataset).load()
        if args.rate > 0:
            ds, _, _ = corrupt(ds, args.mechanism, args.rate, args.seed)
    else:
        ds = load_csv(args.input, args.label)
    cfg = _train_config(args)
    stats = fit_norm_stats(ds.features, args.scale)
    data = ds.__class__(stats.transform(ds.features), ds.feature_names).masked()
    model = new_model(args.model, ds.d, args.seed, args.dae_input)

    def on_log(step, loss):
        print(f"step {step} loss {loss!r}", flush=True)

    train(model, data, cfg, on_log=on_log, keep=False)
    save_model(args.out, model, stats, ds.feature_names)
    print(f"wrote {args.out}")
    return 0


def cmd_impute(args) -> int:
    saved = load_model(args.model)
    model, stats = saved.model, saved.stats
    header, rows = _read_csv(args.input)
    names = saved.feature_names or header
    if saved.feature_names is None and len(header) != model.d:
        raise DimensionError(f"model expects {model.d} columns, input has {len(header)}")
    missing = [n for n in names if n not in header]
    if missing or len(names) != model.d:
        raise DimensionError(f"input lacks model feature column(s) {missing}; model expects {model.d} features")
    cols = [header.index(n) for n in names]

    X = np.empty((len(rows), len(cols)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"{args.input}: row {i + 1} has {len(row)} cells, header has {len(header)}", row=i + 1)
        for k, c in enumerate(cols):
            token = row[c].strip()
            if token.lower() == "na":
                X[i, k] = math.nan
                continue
            try:
                X[i, k] = float(token)
            except ValueError:
                raise ParseError(f"{args.input}: row {i + 1}, column {header[c]!r}: cannot parse {row[c]!r}",
                                 row=i + 1, column=header[c]) from None
    m = np.isnan(X)
    Xn = X if stats is None else stats.transform(np.where(m, 0.0, X))
    filled = impute(model, np.where(m, 0.0, Xn), m) if len(rows) else Xn
    raw = filled if stats is None else stats.inverse(filled)
    if not np.all(np.isfinite(raw[m])):
        raise NumericError("imputation produced non-finite values")

    out_rows = []
    for i, row in enumerate(rows):
        row = list(row)
        for k, c in enumerate(cols):
            if m[i, k]:
                row[c] = fmt(raw[i, k])
        out_rows.append(row)
    _write_csv(args.out, header, out_rows)
    print(f"imputed {int(m.sum())} cells into {args.out}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_experiment(args.config)
    if args.seed is not None:
        cfg.first_seed = args.seed
    if args.seeds is not None:
        cfg.seeds = args.seeds
        cfg.__post_init__()
    dataset = lookup(_registry(args), cfg.dataset).load()
    report = run_experiment(cfg, dataset, args.parallel_seeds)
    out = Path(args.out) if args.out else output_dir()
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.label
    (out / f"{stem}.csv").write_text(report.to_csv())
    (out / f"{stem}_summary.csv").write_text(report.summary_csv())
    table = report.summary_table()
    (out / f"{stem}_summary.txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_evaluate(args) -> int:
    mask_header, mask_rows = _read_csv(args.mask)
    try:
        mask = np.array([[int(v) for v in r] for r in mask_rows], dtype=bool)
    except ValueError:
        raise ParseError(f"{args.mask}: mask cells must be 0 or 1") from None

    def columns(path):
        header, rows = _read_csv(path)
        missing = [n for n in mask_header if n not in header]
        if missing:
            raise DimensionError(f"{path} lacks column(s) {missing}")
        idx = [header.index(n) for n in mask_header]
        try:
            return np.array([[float(r[i]) for i in idx] for r in rows])
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None

    imputed, truth = columns(args.imputed), columns(args.truth)
    if imputed.shape != mask.shape or truth.shape != mask.shape:
        raise DimensionError(f"imputed {imputed.shape}, truth {truth.shape} and mask {mask.shape} differ")
    if args.space == "normalized":
        stats = fit_norm_stats(np.where(mask, np.nan, truth))
        imputed, truth = stats.transform(imputed), stats.transform(truth)
    mode = "per-feature" if args.per_feature else "pooled"
    value = nrms(imputed, truth, mask, mode)
    print(f"nrms {value!r}")
    if args.out:
        _write_csv(args.out, ["metric", "mode", "space", "cells", "value"],
                   [["nrms", mode, args.space, int(mask.sum()), fmt(value)]])
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--registry", help="dataset registry file (default: built-in)")
    common.add_argument("--data-dir", help="directory holding the registry CSVs (default ./data)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="daema", description="Missing-data imputation with mask attention.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", parents=[common], help="inject missingness into a registered dataset")
    p.add_argument("dataset")
    p.add_argument("--mechanism", choices=MECHANISMS, default="mcar")
    p.add_argument("--rate", type=float, default=0.2)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("train", parents=[common], help="train an imputation model and save it")
    p.add_argument("--dataset", help="registered dataset id")
    p.add_argument("--input", help="CSV with NA cells (alternative to --dataset)")
    p.add_argument("--label", help="label column of --input, excluded from the features")
    p.add_argument("--mechanism", choices=MECHANISMS, default="mcar")
    p.add_argument("--rate", type=float, default=0.0, help="missingness injected into --dataset first")
    p.add_argument("--model", choices=("daema", "dae"), default="daema")
    p.add_argument("--config", help="experiment file whose [train] section provides defaults")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--artificial-rate", type=float)
    p.add_argument("--sampling", choices=("replacement", "epoch"))
    p.add_argument("--dae-input", choices=("data+mask", "data-only"), default="data+mask")
    p.add_argument("--scale", choices=("std", "variance"), default="std")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("impute", parents=[common], help="fill NA cells of a CSV with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("experiment", parents=[common], help="run a multi-seed comparison from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="report directory (default $DAEMA_OUTPUT_DIR or ./results)")
    p.add_argument("--seeds", type=int, help="override the number of seeds")
    p.add_argument("--parallel-seeds", type=int, default=1)
    p.add_argument("--seed", type=int, help="override the config's first seed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("evaluate", parents=[common], help="NRMS between an imputed and a ground-truth CSV")
    p.add_argument("--imputed", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--space", choices=("normalized", "raw"), default="normalized")
    p.add_argument("--per-feature", action="store_true")
    p.add_argument("--out", help="CSV file for the result")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ExperimentError):
        exc = exc.cause
    return 3 if isinstance(exc, NumericError) else 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except DaemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
