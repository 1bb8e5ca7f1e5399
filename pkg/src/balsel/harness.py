"""Paired experiment grids over imbalance factor and noise rate.

Each cell materializes one dataset file; every method in the grid loads that
same file, so the comparison is paired.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as dsmod
from .evaluation import Monitor
from .trainer import RunConfig, RunResult, _coerce, run

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["if", "nr", "method", "acc_last10", "acc_best", "sel_precision_final", "masked_frac_final"]

_DATA_KEYS = {
    "num_classes": int,
    "base_count": int,
    "feature_dim": int,
    "class_separation": float,
    "test_per_class": int,
    "seed": int,
}


@dataclass
class ExperimentGrid:
    imbalance_factors: list = field(default_factory=lambda: [1.0, 10.0, 50.0])
    noise_rates: list = field(default_factory=lambda: [0.0, 0.2, 0.6])
    repetitions: int = 1
    methods: list = field(default_factory=lambda: ["ours", "standard"])
    num_classes: int = 10
    base_count: int = 500
    feature_dim: int = 32
    class_separation: float = 4.0
    test_per_class: int = 100
    seed: int = 0
    run_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.imbalance_factors or not self.noise_rates or not self.methods:
            raise ValueError("grid must have at least one cell and one method")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        # fail early on bad run overrides
        RunConfig(**self.run_overrides)

    def cells(self):
        return [(float(i), float(n)) for i in self.imbalance_factors for n in self.noise_rates]

    def dataset_spec(self, imbalance_factor, noise_rate, rep) -> dsmod.DatasetSpec:
        return dsmod.DatasetSpec(
            num_classes=self.num_classes,
            base_count=self.base_count,
            imbalance_factor=imbalance_factor,
            noise_rate=noise_rate,
            feature_dim=self.feature_dim,
            class_separation=self.class_separation,
            seed=self.seed + rep,
        )

    def run_config(self, noise_rate, method, rep) -> RunConfig:
        base = dict(self.run_overrides)
        base.update(noise_rate=noise_rate, method=method, seed=base.get("seed", self.seed) + rep)
        return RunConfig(**base)


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def parse_grid_text(text: str) -> ExperimentGrid:
    """``key = value`` grid file; unrecognized keys are treated as RunConfig fields."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[grid]\n" + text)
    kwargs, overrides = {}, {}
    run_fields = {f.name for f in dataclasses.fields(RunConfig)}
    for key, raw in parser["grid"].items():
        if key in ("imbalance_factors", "noise_rates"):
            kwargs[key] = _floats(raw)
        elif key == "methods":
            kwargs[key] = [m.strip() for m in raw.replace(",", " ").split()]
        elif key == "repetitions":
            kwargs[key] = int(raw)
        elif key in _DATA_KEYS:
            kwargs[key] = _DATA_KEYS[key](raw)
        elif key.startswith("run_") and key[4:] in run_fields:
            overrides[key[4:]] = _coerce(key[4:], raw)
        elif key in run_fields:
            overrides[key] = _coerce(key, raw)
        else:
            raise ValueError(f"unknown grid key {key!r}")
    return ExperimentGrid(run_overrides=overrides, **kwargs)


def load_grid(path) -> ExperimentGrid:
    return parse_grid_text(Path(path).read_text())


def cell_tag(imbalance_factor, noise_rate, rep) -> str:
    return f"if{imbalance_factor:g}_nr{noise_rate:g}_rep{rep}"


def _final(reports, attr):
    vals = [getattr(r, attr) for r in reports if getattr(r, attr) is not None]
    return float(vals[-1]) if vals else math.nan


def summarize(result: RunResult) -> dict:
    return {
        "acc_last10": result.last_k_accuracy(10),
        "acc_best": result.best_accuracy(),
        "sel_precision_final": _final(result.reports, "selection_precision"),
        "masked_frac_final": _final(result.reports, "masked_fraction"),
    }


def run_cell(grid: ExperimentGrid, imbalance_factor, noise_rate, rep, out_dir=None) -> dict:
    """All methods on one (IF, noise, repetition) dataset. Returns ``{method: summary}``."""
    spec = grid.dataset_spec(imbalance_factor, noise_rate, rep)
    train = dsmod.make_dataset(spec)
    test = dsmod.generate_test_split(spec, grid.test_per_class)
    tag = cell_tag(imbalance_factor, noise_rate, rep)
    if out_dir is not None:
        out = Path(out_dir)
        (out / "data").mkdir(parents=True, exist_ok=True)
        (out / "logs").mkdir(parents=True, exist_ok=True)
        train_path, test_path = out / "data" / f"{tag}.cbsd", out / "data" / f"{tag}.test.cbsd"
        dsmod.save(train, train_path)
        dsmod.save(test, test_path)
        train, test = dsmod.load(train_path), dsmod.load(test_path)
    monitor = Monitor(test, train)
    out = {}
    for method in grid.methods:
        cfg = grid.run_config(noise_rate, method, rep)
        log_path = None if out_dir is None else Path(out_dir) / "logs" / f"{tag}_{method}.jsonl"
        result = run(cfg, train.training_view(), monitor, log_path=log_path)
        out[method] = summarize(result)
        log.info("%s %s acc_last10=%.4f", tag, method, out[method]["acc_last10"])
    return out


def _cell_job(args):
    grid, imbalance_factor, noise_rate, out_dir = args
    try:
        reps = [run_cell(grid, imbalance_factor, noise_rate, r, out_dir) for r in range(grid.repetitions)]
        return imbalance_factor, noise_rate, reps, None
    except Exception:  # recorded per cell; the grid carries on
        return imbalance_factor, noise_rate, None, traceback.format_exc()


@dataclass
class ResultTable:
    rows: list
    errors: dict

    def row(self, imbalance_factor, noise_rate, method) -> dict:
        for r in self.rows:
            if r["if"] == imbalance_factor and r["nr"] == noise_rate and r["method"] == method:
                return r
        raise KeyError((imbalance_factor, noise_rate, method))

    def deltas(self, metric="acc_last10", ours="ours", baseline="standard") -> list:
        out = []
        cells = sorted({(r["if"], r["nr"]) for r in self.rows})
        for i, n in cells:
            try:
                d = self.row(i, n, ours)[metric] - self.row(i, n, baseline)[metric]
            except KeyError:
                continue
            out.append({"if": i, "nr": n, f"delta_{metric}": d})
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (f"{r[k]:.6f}" if isinstance(r[k], float) and k not in ("if", "nr") else r[k])
                            for k in RESULT_COLUMNS})

    def write_deltas_csv(self, path) -> None:
        rows = self.deltas()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["if", "nr", "delta_acc_last10"])
            w.writeheader()
            for r in rows:
                w.writerow({"if": r["if"], "nr": r["nr"], "delta_acc_last10": f"{r['delta_acc_last10']:.6f}"})

    def format(self) -> str:
        methods = []
        for r in self.rows:
            if r["method"] not in methods:
                methods.append(r["method"])
        cells = sorted({(r["if"], r["nr"]) for r in self.rows})
        deltas = {(d["if"], d["nr"]): d["delta_acc_last10"] for d in self.deltas()}
        head = f"{'IF':>6} {'NR':>5} " + " ".join(f"{m:>10}" for m in methods) + f" {'delta':>8}"
        lines = [head, "-" * len(head)]
        for i, n in cells:
            accs = []
            for m in methods:
                try:
                    accs.append(f"{100 * self.row(i, n, m)['acc_last10']:10.2f}")
                except KeyError:
                    accs.append(f"{'n/a':>10}")
            dlt = deltas.get((i, n))
            lines.append(f"{i:6g} {n:5g} " + " ".join(accs) + (f" {100 * dlt:+8.2f}" if dlt is not None else ""))
        for (i, n), err in self.errors.items():
            lines.append(f"cell IF={i:g} NR={n:g} failed: {err.strip().splitlines()[-1]}")
        return "\n".join(lines)


def run_grid(grid: ExperimentGrid, out_dir=None, jobs: int = 1) -> ResultTable:
    """Run every cell; rows average the per-repetition summaries."""
    jobs_args = [(grid, i, n, out_dir) for i, n in grid.cells()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_cell_job, jobs_args))
    else:
        outcomes = [_cell_job(a) for a in jobs_args]
    rows, errors = [], {}
    for imbalance_factor, noise_rate, reps, err in outcomes:
        if err is not None:
            errors[(imbalance_factor, noise_rate)] = err
            log.error("cell IF=%g NR=%g failed\n%s", imbalance_factor, noise_rate, err)
            for m in grid.methods:
                rows.append({"if": imbalance_factor, "nr": noise_rate, "method": m,
                             **{k: math.nan for k in RESULT_COLUMNS[3:]}})
            continue
        for m in grid.methods:
            agg = {k: float(np.mean([rep[m][k] for rep in reps])) for k in RESULT_COLUMNS[3:]}
            rows.append({"if": imbalance_factor, "nr": noise_rate, "method": m, **agg})
    table = ResultTable(rows, errors)
    if out_dir is not None:
        table.write_csv(Path(out_dir) / "results.csv")
        table.write_deltas_csv(Path(out_dir) / "deltas.csv")
        (Path(out_dir) / "results.txt").write_text(table.format() + "\n")
    return table
