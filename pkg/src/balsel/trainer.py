"""Training loops: warm-up, robust stage and the plain cross-entropy baseline.

Warm-up epochs minimize cross-entropy plus prediction entropy on every
sample. Each robust epoch starts from a frozen snapshot that drives the
class-balanced partition, the mixing confidences and the ACM threshold; the
mini-batch loop then combines the mixed clean loss with the masked
consistency loss in a single SGD step per batch.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import augmentation as aug
from . import correction
from . import mixing
from . import model as mlp
from . import selection
from .dataset import TrainingView

log = logging.getLogger(__name__)

METHODS = ("ours", "standard")


@dataclass(frozen=True)
class RunConfig:
    warmup_epochs: int = 15
    total_epochs: int = 60
    batch_size: int = 128
    initial_lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 0.0
    noise_rate: float = 0.0
    rho: float | None = None
    phi: float = 4.0
    tau: float = 0.2
    ema_coefficient: float = 0.9
    loss_weight: float = 1.0
    hidden_dim: int = 64
    weak_sigma: float = 0.05
    strong_sigma: float = 0.2
    strong_mask_prob: float = 0.2
    seed: int = 0
    method: str = "ours"

    def __post_init__(self):
        if not 0 < self.warmup_epochs <= self.total_epochs:
            raise ValueError("need 0 < warmup_epochs <= total_epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.initial_lr < 0:
            raise ValueError("initial_lr must be >= 0")
        if not 0 <= self.noise_rate < 1:
            raise ValueError("noise_rate must lie in [0, 1)")
        if not 0 < self.selection_ratio <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")
        if self.phi <= 0:
            raise ValueError("phi must be > 0")
        if not 0 <= self.ema_coefficient < 1:
            raise ValueError("ema_coefficient must lie in [0, 1)")
        if self.loss_weight < 0:
            raise ValueError("loss_weight must be >= 0")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        self.augment  # validates the augmentation fields

    @property
    def selection_ratio(self) -> float:
        return 1.0 - self.noise_rate if self.rho is None else self.rho

    @property
    def augment(self) -> aug.AugmentConfig:
        return aug.AugmentConfig(self.weak_sigma, self.strong_sigma, self.strong_mask_prob)

    def lr_at(self, epoch: int) -> float:
        """Learning rate for 1-based ``epoch``: constant in warm-up, cosine after."""
        if epoch <= self.warmup_epochs:
            return self.initial_lr
        robust = self.total_epochs - self.warmup_epochs
        return mlp.cosine_lr(self.initial_lr, epoch - self.warmup_epochs - 1, robust)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _coerce(name: str, text: str):
    ftype = {f.name: f.type for f in dataclasses.fields(RunConfig)}[name]
    text = text.strip()
    if "None" in ftype and text.lower() in ("", "none"):
        return None
    if ftype.startswith("int"):
        return int(text)
    if ftype.startswith("float"):
        return float(text)
    return text.strip("\"'")


def parse_config_text(text: str, **overrides) -> RunConfig:
    """Parse ``key = value`` lines (``#`` comments allowed) into a RunConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[run]\n" + text)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    for key, raw in parser["run"].items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    return parse_config_text(Path(path).read_text(), **overrides)


def format_config(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config.to_dict().items())


@dataclass
class EpochReport:
    epoch: int
    stage: str
    lr: float
    train_loss: float
    test_accuracy: float | None
    selection_precision: float | None = None
    selection_recall: float | None = None
    per_class_clean_counts: list | None = None
    masked_fraction: float | None = None
    threshold: float | None = None
    steps: int = 0

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


@dataclass
class BatchLoss:
    total: float
    clean: float
    reg: float


@dataclass
class RunResult:
    config: RunConfig
    reports: list
    model: mlp.MLP
    tracker: correction.SampleTracker | None
    partitions: list = field(default_factory=list)
    trainer: "Trainer | None" = None

    def last_k_accuracy(self, k: int = 10) -> float:
        accs = [r.test_accuracy for r in self.reports[-k:]]
        return float(np.mean(accs))

    def best_accuracy(self) -> float:
        return float(max(r.test_accuracy for r in self.reports))


class Trainer:
    """Runs one configuration over a training view.

    ``monitor`` (see :class:`balsel.evaluation.Monitor`) supplies test
    accuracy and selection quality; training never reads true labels.
    """

    def __init__(self, config: RunConfig, train: TrainingView, monitor=None, keep_batch_log=False):
        self.config = config
        self.train = train
        self.monitor = monitor
        self.x = np.asarray(train.features, dtype=np.float64)
        self.y = np.asarray(train.labels, dtype=np.int64)
        self.y_onehot = mixing.one_hot(self.y, train.num_classes)
        self.n = len(train)
        self.num_classes = train.num_classes

        seed = config.seed
        self.model = mlp.init_mlp(self.x.shape[1], config.hidden_dim, self.num_classes,
                                  np.random.default_rng([seed, 0]))
        self.shuffle_rng = np.random.default_rng([seed, 1])
        self.aug_rng = np.random.default_rng([seed, 2])
        self.mix_rng = np.random.default_rng([seed, 3])
        self.tracker = correction.SampleTracker(self.n, self.num_classes) if config.method == "ours" else None
        self.steps = 0
        self.partitions = []
        self.batch_log = [] if keep_batch_log else None
        self.last_selection = None
        self.last_mask = None

    def _batches(self):
        order = self.shuffle_rng.permutation(self.n)
        bs = self.config.batch_size
        return [order[i:i + bs] for i in range(0, self.n, bs)]

    def _step(self, grads, lr):
        mlp.sgd_step(self.model, grads, lr, self.config.momentum, self.config.weight_decay)
        self.steps += 1

    def _log_batch(self, total, clean, reg):
        if self.batch_log is not None:
            self.batch_log.append(BatchLoss(total, clean, reg))

    def _report(self, epoch, stage, lr, losses, **extra):
        acc = self.monitor.test_accuracy(self.model) if self.monitor else None
        return EpochReport(epoch=epoch, stage=stage, lr=lr, train_loss=float(np.mean(losses)),
                           test_accuracy=acc, steps=self.steps, **extra)

    def standard_epoch(self, epoch: int) -> EpochReport:
        lr = self.config.lr_at(epoch)
        losses = []
        for b in self._batches():
            loss, g = mlp.loss_and_grad(self.model, self.x[b], self.y_onehot[b])
            self._step(g, lr)
            self._log_batch(loss, loss, 0.0)
            losses.append(loss)
        return self._report(epoch, "standard", lr, losses)

    def warmup_epoch(self, epoch: int) -> EpochReport:
        lr = self.config.lr_at(epoch)
        losses = []
        for b in self._batches():
            l_ce, g_ce = mlp.loss_and_grad(self.model, self.x[b], self.y_onehot[b])
            l_cp, g_cp = mlp.entropy_loss_and_grad(self.model, self.x[b])
            self._step(mlp.add_grads(g_ce, g_cp), lr)
            self._log_batch(l_ce + l_cp, l_ce, l_cp)
            losses.append(l_ce + l_cp)
        # Track every sample from a frozen end-of-epoch snapshot.
        everyone = np.arange(self.n)
        p_weak = mlp.forward(self.model, aug.weak(self.x, self.aug_rng, self.config.augment))
        self.tracker.ema_update(everyone, p_weak, self.config.ema_coefficient)
        self.tracker.accumulate_margins(everyone)
        return self._report(epoch, "warmup", lr, losses)

    def partition(self, model=None) -> tuple:
        """Frozen-snapshot partition and per-sample max confidences."""
        model = self.model if model is None else model
        records = selection.compute_losses(model, self.x, self.y, self.train.ids)
        part = selection.select(records, self.config.selection_ratio, self.num_classes, self.n)
        conf = np.exp(mlp.log_probs(model, self.x)).max(axis=1)
        return part, records, conf

    def robust_epoch(self, epoch: int) -> EpochReport:
        cfg = self.config
        lr = cfg.lr_at(epoch)
        part, records, conf = self.partition()
        self.partitions.append(part)
        self.last_selection = (records, part)
        is_clean = part.clean_mask(self.train.ids)
        noisy_rows = np.flatnonzero(~is_clean)

        kept = np.zeros(self.n, dtype=bool)
        threshold = None
        masked_fraction = 0.0
        if len(noisy_rows):
            acm = self.tracker.acm(noisy_rows)
            threshold = correction.compute_threshold(acm, cfg.tau)
            kept[noisy_rows] = correction.keep_mask(acm, threshold)
            masked_fraction = 1.0 - kept[noisy_rows].sum() / len(noisy_rows)
            self.last_mask = (noisy_rows, self.tracker.predicted_class(noisy_rows), acm, kept[noisy_rows])
        else:
            self.last_mask = None

        losses = []
        for b in self._batches():
            c = b[is_clean[b]]
            grads = mlp.zero_grad(self.model)
            l_dc = 0.0
            if len(c):
                mixed = mixing.augment_clean_batch(self.x[c], self.y[c], conf[c], self.num_classes,
                                                   self.mix_rng, cfg.phi)
                l_dc, grads = mlp.loss_and_grad(self.model, mixed.features, mixed.targets)

            p_weak = mlp.forward(self.model, aug.weak(self.x[b], self.aug_rng, cfg.augment))
            self.tracker.ema_update(b, p_weak, cfg.ema_coefficient)
            self.tracker.accumulate_margins(b)

            k = b[kept[b]]
            l_reg, g_reg = correction.consistency_loss(
                self.model, aug.strong(self.x[k], self.aug_rng, cfg.augment), self.tracker.ema[k]
            )
            total = l_dc + cfg.loss_weight * l_reg
            self._step(mlp.add_grads(grads, g_reg, cfg.loss_weight), lr)
            self._log_batch(total, l_dc, l_reg)
            losses.append(total)

        quality = self.monitor.selection(part) if self.monitor else None
        return self._report(
            epoch, "robust", lr, losses,
            selection_precision=quality.precision if quality else None,
            selection_recall=quality.recall if quality else None,
            per_class_clean_counts=(quality.per_class_clean_counts if quality
                                    else np.bincount(self.y[is_clean], minlength=self.num_classes).tolist()),
            masked_fraction=float(masked_fraction),
            threshold=threshold,
        )

    def run_epoch(self, epoch: int) -> EpochReport:
        if self.config.method == "standard":
            report = self.standard_epoch(epoch)
        elif epoch <= self.config.warmup_epochs:
            report = self.warmup_epoch(epoch)
        else:
            report = self.robust_epoch(epoch)
        self.model.epoch = epoch
        return report

    def epochs(self):
        for epoch in range(self.model.epoch + 1, self.config.total_epochs + 1):
            report = self.run_epoch(epoch)
            log.debug("epoch %d %s loss=%.4f acc=%s", epoch, report.stage, report.train_loss,
                      report.test_accuracy)
            yield report


def run(config: RunConfig, train: TrainingView, monitor=None, log_path=None, checkpoint_path=None,
        keep_batch_log=False, partition_csv=None, mask_csv=None) -> RunResult:
    """Train for ``config.total_epochs`` epochs.

    Optionally streams one JSON line per epoch to ``log_path``, saves a
    checkpoint, and appends per-epoch partition / mask diagnostics as CSV.
    """
    trainer = Trainer(config, train, monitor, keep_batch_log=keep_batch_log)
    reports = []
    for path in (partition_csv, mask_csv):
        if path:
            Path(path).write_text("")
    fh = open(log_path, "w") if log_path else None
    try:
        for report in trainer.epochs():
            reports.append(report)
            if fh:
                fh.write(report.to_json() + "\n")
                fh.flush()
            if report.stage == "robust":
                if partition_csv:
                    records, part = trainer.last_selection
                    selection.write_partition_csv(partition_csv, report.epoch, part, records)
                if mask_csv and trainer.last_mask is not None:
                    rows, predicted, acm, kept = trainer.last_mask
                    correction.write_mask_csv(mask_csv, report.epoch, train.ids[rows], predicted, acm, kept)
    finally:
        if fh:
            fh.close()
    if checkpoint_path:
        mlp.save_checkpoint(trainer.model, checkpoint_path, {
            "config": config.to_dict(),
            "num_classes": train.num_classes,
            "feature_dim": int(trainer.x.shape[1]),
        })
    return RunResult(config, reports, trainer.model, trainer.tracker, trainer.partitions, trainer)
