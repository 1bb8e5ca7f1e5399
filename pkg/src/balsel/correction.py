"""EMA label correction, confidence margins and the ACM mask.

Every sample keeps a soft label ``y_hat`` updated as
``y_hat <- a * y_hat + (1 - a) * p(weak view)`` (the first update copies the
prediction), plus the running sum of its per-class margin vector. The ACM of
a sample is the summed margin of its *current* argmax class divided by the
number of epochs tracked.
"""

from __future__ import annotations

import csv

import numpy as np

from . import model as mlp


def confidence_margin(y_hat) -> np.ndarray:
    """Margin vector(s): top class minus runner-up, others minus the top value.

    Argmax ties resolve to the lowest class index (``np.argmax``).
    """
    y = np.asarray(y_hat, dtype=np.float64)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    rows = np.arange(len(y))
    top = np.argmax(y, axis=1)
    top_val = y[rows, top]
    masked = y.copy()
    masked[rows, top] = -np.inf
    runner_up = masked.max(axis=1)
    cm = y - top_val[:, None]
    cm[rows, top] = top_val - runner_up
    return cm[0] if single else cm


class SampleTracker:
    """Per-sample EMA soft labels and cumulative margin sums, indexed by row position."""

    def __init__(self, n_samples: int, num_classes: int):
        self.ema = np.zeros((n_samples, num_classes))
        self.cm_cumsum = np.zeros((n_samples, num_classes))
        self.epochs_tracked = np.zeros(n_samples, dtype=np.int64)
        self.initialized = np.zeros(n_samples, dtype=bool)

    def __len__(self):
        return len(self.ema)

    def ema_update(self, idx, p_weak, coefficient: float) -> np.ndarray:
        if not 0 <= coefficient < 1:
            raise ValueError("EMA coefficient must lie in [0, 1)")
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        p = np.atleast_2d(np.asarray(p_weak, dtype=np.float64))
        a = np.where(self.initialized[idx], coefficient, 0.0)[:, None]
        self.ema[idx] = a * self.ema[idx] + (1.0 - a) * p
        self.initialized[idx] = True
        return self.ema[idx]

    def accumulate_margins(self, idx) -> None:
        """Add the current margin vector; counts as one tracked epoch."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if not np.all(self.initialized[idx]):
            raise ValueError("tracker has no soft label for some samples")
        self.cm_cumsum[idx] += confidence_margin(self.ema[idx])
        self.epochs_tracked[idx] += 1

    def predicted_class(self, idx) -> np.ndarray:
        return np.argmax(self.ema[np.asarray(idx, dtype=np.int64)], axis=-1)

    def acm(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        t = self.epochs_tracked[idx]
        if np.any(t == 0):
            raise ValueError("ACM needs at least one tracked epoch")
        cls = self.predicted_class(idx)
        return self.cm_cumsum[idx, cls] / t


def compute_threshold(acm_values, tau: float = 0.2) -> float:
    v = np.asarray(acm_values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no ACM values")
    if not 0 <= tau <= 1:
        raise ValueError("tau must lie in [0, 1]")
    lo, hi = v.min(), v.max()
    return float(lo + (hi - lo) * tau)


def keep_mask(acm_values, threshold: float) -> np.ndarray:
    return np.asarray(acm_values) > threshold


def consistency_loss(model, x_strong, targets):
    """Soft cross-entropy of strong-view predictions against fixed EMA targets.

    Zero loss and zero gradient for an empty kept set.
    """
    x_strong = np.asarray(x_strong)
    if len(x_strong) == 0:
        return 0.0, mlp.zero_grad(model)
    return mlp.loss_and_grad(model, x_strong, targets)


def write_mask_csv(path, epoch, ids, predicted, acm_values, kept, append=True):
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if fh.tell() == 0:
            w.writerow(["epoch", "sample_id", "argmax", "acm", "kept"])
        for row in zip(ids, predicted, acm_values, kept):
            w.writerow([epoch, int(row[0]), int(row[1]), repr(float(row[2])), int(bool(row[3]))])
