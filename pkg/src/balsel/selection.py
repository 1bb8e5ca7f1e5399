"""Class-balanced small-loss selection.

Losses over the whole training set are min-max normalized, then within each
observed class the ``min(floor(rho * N / C), class size)`` smallest ones are
declared clean. Head classes are capped at the quota; classes at or below
it are taken whole. Unused quota is not redistributed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import model as mlp


@dataclass(frozen=True)
class LossRecords:
    ids: np.ndarray
    raw: np.ndarray
    classes: np.ndarray
    normalized: np.ndarray | None = None


@dataclass(frozen=True)
class Partition:
    clean_ids: np.ndarray
    noisy_ids: np.ndarray
    quota: np.ndarray

    def clean_mask(self, ids) -> np.ndarray:
        return np.isin(ids, self.clean_ids)


def compute_losses(model, features, labels, ids) -> LossRecords:
    """Per-sample cross-entropy against the observed labels on a frozen model."""
    log_p = mlp.log_probs(model, features)
    labels = np.asarray(labels, dtype=np.int64)
    raw = -log_p[np.arange(len(labels)), labels]
    return LossRecords(ids=np.asarray(ids), raw=raw, classes=labels)


def normalize(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        raise ValueError("need at least one loss")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def class_quota(rho: float, n_total: int, num_classes: int) -> int:
    return int(np.floor(rho * n_total / num_classes))


def select(records: LossRecords, rho: float, num_classes: int, n_total: int | None = None) -> Partition:
    """Split ``records`` into clean and noisy ids. Ties go to the smaller id."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    ids = np.asarray(records.ids)
    classes = np.asarray(records.classes, dtype=np.int64)
    if len(classes) and (classes.min() < 0 or classes.max() >= num_classes):
        raise ValueError("record class outside [0, C)")
    norm = records.normalized if records.normalized is not None else normalize(records.raw)
    n_total = len(ids) if n_total is None else n_total
    cap = class_quota(rho, n_total, num_classes)

    # Sort once by (class, normalized loss, id) and take the head of each class run.
    order = np.lexsort((ids, norm, classes))
    sorted_classes = classes[order]
    starts = np.searchsorted(sorted_classes, np.arange(num_classes), side="left")
    counts = np.bincount(classes, minlength=num_classes)
    quota = np.minimum(cap, counts)
    rank = np.arange(len(order)) - starts[sorted_classes]
    clean_sorted = rank < quota[sorted_classes]
    clean = np.sort(ids[order[clean_sorted]])
    noisy = np.sort(ids[order[~clean_sorted]])
    return Partition(clean_ids=clean, noisy_ids=noisy, quota=quota)


def write_partition_csv(path, epoch: int, partition: Partition, records: LossRecords, append=True):
    clean = partition.clean_mask(records.ids)
    norm = records.normalized if records.normalized is not None else normalize(records.raw)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if fh.tell() == 0:
            w.writerow(["epoch", "sample_id", "flag", "normalized_loss"])
        for sid, is_clean, nl in zip(records.ids, clean, norm):
            w.writerow([epoch, int(sid), "clean" if is_clean else "noisy", repr(float(nl))])
