"""Metrics that need ground truth.

This is the only module that reads :attr:`Dataset.true_labels`. The trainer
receives a :class:`Monitor` and never touches the truth itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as mlp
from .dataset import Dataset
from .selection import Partition


@dataclass(frozen=True)
class SelectionQuality:
    precision: float
    recall: float
    per_class_clean_counts: list


def selection_quality(partition: Partition, dataset: Dataset) -> SelectionQuality:
    """Precision and recall of the clean subset against the hidden labels.

    An empty clean subset scores 0 on both.
    """
    is_clean = np.isin(dataset.ids, partition.clean_ids)
    truly_clean = dataset.observed_labels == dataset.true_labels
    hits = int(np.sum(is_clean & truly_clean))
    n_sel = int(is_clean.sum())
    n_true = int(truly_clean.sum())
    counts = np.bincount(dataset.observed_labels[is_clean], minlength=dataset.num_classes)
    return SelectionQuality(
        precision=hits / n_sel if n_sel else 0.0,
        recall=hits / n_true if n_true else 0.0,
        per_class_clean_counts=counts.tolist(),
    )


def confusion_matrix(true, pred, num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true), np.asarray(pred)), 1)
    return cm


def evaluate(model, dataset: Dataset) -> dict:
    """Overall accuracy, per-class accuracy and confusion matrix (rows = true class)."""
    if model.num_classes != dataset.num_classes or model.input_dim != dataset.feature_dim:
        raise mlp.CheckpointError(
            f"model expects d={model.input_dim}, C={model.num_classes}; "
            f"dataset has d={dataset.feature_dim}, C={dataset.num_classes}"
        )
    pred = mlp.predict(model, dataset.features)
    true = dataset.true_labels
    cm = confusion_matrix(true, pred, dataset.num_classes)
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0, np.diag(cm) / support, np.nan)
    return {
        "accuracy": float(np.mean(pred == true)) if len(true) else 0.0,
        "per_class_accuracy": per_class.tolist(),
        "support": support.tolist(),
        "confusion": cm,
    }


class Monitor:
    """Oracle-side hooks handed to the trainer.

    ``test`` is the held-out split; ``train_truth`` the training set with its
    hidden labels, used to score selections. Either may be ``None``.
    """

    def __init__(self, test: Dataset | None = None, train_truth: Dataset | None = None):
        self.test = test
        self.train_truth = train_truth

    def test_accuracy(self, model):
        if self.test is None or len(self.test) == 0:
            return None
        return float(np.mean(mlp.predict(model, self.test.features) == self.test.true_labels))

    def selection(self, partition: Partition):
        if self.train_truth is None:
            return None
        return selection_quality(partition, self.train_truth)
