"""Command-line entry points: ``generate``, ``train``, ``grid`` and ``eval``.

Run as ``python -m balsel <command> ...``. Exit codes: 0 success, 2 usage,
3 validation, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys

import numpy as np

from . import dataset as dsmod
from . import harness
from . import model as mlp
from . import selection
from .evaluation import Monitor, evaluate, selection_quality
from .trainer import RunConfig, format_config, load_config, run

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(RunConfig):
        if f.name == "method":
            continue
        kind = {"int": int, "float": float}.get(f.type.split(" ")[0], str)
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None,
                       help=f"RunConfig.{f.name} (default {f.default})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balsel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a blobs dataset file")
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--base", type=int, default=500, help="head-class count n_0")
    g.add_argument("--if", dest="imbalance_factor", type=float, default=1.0)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--separation", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--test-out", help="also write the balanced clean test split here")
    g.add_argument("--test-per-class", type=int, default=100)
    g.add_argument("--csv", help="also export the training split as CSV")

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--config", help="key = value file with RunConfig fields")
    t.add_argument("--data", help="training dataset file")
    t.add_argument("--test", help="test dataset file for per-epoch accuracy")
    t.add_argument("--method", choices=["ours", "standard"], default=None)
    t.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    t.add_argument("--log", help="JSON-lines epoch log")
    t.add_argument("--checkpoint")
    t.add_argument("--partition-csv")
    t.add_argument("--mask-csv")
    _add_run_flags(t)

    r = sub.add_parser("grid", help="paired IF x noise grid")
    r.add_argument("spec", help="grid file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--jobs", type=int, default=1)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--oracle", action="store_true",
                   help="also score the checkpoint's clean/noisy selection against the hidden labels")
    e.add_argument("--confusion", help="write the confusion matrix as CSV")
    return parser


def cmd_generate(args) -> int:
    spec = dsmod.DatasetSpec(
        num_classes=args.classes, base_count=args.base, imbalance_factor=args.imbalance_factor,
        noise_rate=args.noise, feature_dim=args.dim, class_separation=args.separation, seed=args.seed,
    )
    data = dsmod.make_dataset(spec)
    dsmod.save(data, args.out)
    if args.test_out:
        dsmod.save(dsmod.generate_test_split(spec, args.test_per_class), args.test_out)
    if args.csv:
        dsmod.export_csv(data, args.csv)
    counts = dsmod.class_counts(data)
    print(f"wrote {len(data)} samples to {args.out}")
    print("class sizes: " + " ".join(str(c) for c in spec.class_sizes()))
    print("observed label counts: " + " ".join(str(c) for c in counts))
    print(f"observed noise fraction: {data.noise_mask().mean():.4f}")
    return EXIT_OK


def resolve_config(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        return load_config(args.config, **overrides)
    return RunConfig(**overrides)


def cmd_train(args) -> int:
    config = resolve_config(args)
    if args.dry_run:
        print(format_config(config), end="")
        return EXIT_OK
    if not args.data:
        raise _Usage("train needs --data unless --dry-run is given")
    train = dsmod.load(args.data)
    test = dsmod.load(args.test) if args.test else None
    if test is not None and (test.num_classes, test.feature_dim) != (train.num_classes, train.feature_dim):
        raise ValueError("test split does not match the training data shape")
    result = run(config, train.training_view(), Monitor(test, train), log_path=args.log,
                 checkpoint_path=args.checkpoint, partition_csv=args.partition_csv, mask_csv=args.mask_csv)
    last = result.reports[-1]
    print(f"finished {len(result.reports)} epochs ({config.method})")
    if last.test_accuracy is not None:
        print(f"last-10 accuracy {result.last_k_accuracy(10):.4f}  best {result.best_accuracy():.4f}")
    return EXIT_OK


def cmd_grid(args) -> int:
    grid = harness.load_grid(args.spec)
    table = harness.run_grid(grid, args.out, jobs=args.jobs)
    print(table.format())
    return EXIT_RUNTIME if table.errors else EXIT_OK


def cmd_eval(args) -> int:
    model, meta = mlp.load_checkpoint(args.checkpoint)
    data = dsmod.load(args.data)
    metrics = evaluate(model, data)
    print(f"accuracy {metrics['accuracy']:.4f} on {len(data)} samples")
    for c, (acc, n) in enumerate(zip(metrics["per_class_accuracy"], metrics["support"])):
        print(f"  class {c:3d}  n={n:6d}  acc={acc:.4f}")
    if args.confusion:
        with open(args.confusion, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["true"] + [f"pred_{c}" for c in range(data.num_classes)])
            for c, row in enumerate(metrics["confusion"]):
                w.writerow([c] + row.tolist())
    if args.oracle:
        cfg = RunConfig(**meta["config"]) if "config" in meta else RunConfig()
        records = selection.compute_losses(model, data.features, data.observed_labels, data.ids)
        part = selection.select(records, cfg.selection_ratio, data.num_classes, len(data))
        q = selection_quality(part, data)
        print(json.dumps({"selection_precision": q.precision, "selection_recall": q.recall,
                          "per_class_clean_counts": q.per_class_clean_counts}))
    return EXIT_OK


class _Usage(Exception):
    pass


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "grid": cmd_grid, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dsmod.DatasetFormatError, mlp.CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
