"""Confidence-weighted mixing of clean samples.

For a pair of clean samples the donor with the higher max-softmax
confidence receives the larger coefficient ``l = max(l', 1 - l')`` with
``l' ~ Beta(phi, phi)``. Exact confidence ties favour the first donor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MixedBatch:
    features: np.ndarray
    targets: np.ndarray
    coefficients: np.ndarray
    donors: np.ndarray  # (n, 2) row positions of (i, j) in the input batch

    def __len__(self):
        return len(self.features)


def draw_coefficient(rng, phi: float = 4.0, size=None):
    if phi <= 0:
        raise ValueError("phi must be > 0")
    lam = rng.beta(phi, phi, size=size)
    return np.maximum(lam, 1.0 - lam)


def mix(x_i, x_j, y_i, y_j, conf_i, conf_j, lam):
    """Mix two samples (or row-aligned batches of them).

    Returns ``(x_mixed, y_mixed)``; ``y`` are label distributions.
    """
    x_i, x_j = np.asarray(x_i, dtype=np.float64), np.asarray(x_j, dtype=np.float64)
    y_i, y_j = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if x_i.shape != x_j.shape or y_i.shape != y_j.shape:
        raise ValueError("donor shapes differ")
    lam = np.asarray(lam, dtype=np.float64)
    first_wins = np.asarray(conf_i) >= np.asarray(conf_j)
    w_i = np.where(first_wins, lam, 1.0 - lam)
    w_j = np.where(first_wins, 1.0 - lam, lam)
    if x_i.ndim > 1:
        w_i, w_j = w_i[..., None], w_j[..., None]
    return w_i * x_i + w_j * x_j, w_i * y_i + w_j * y_j


def one_hot(labels, num_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def augment_clean_batch(features, labels, confidences, num_classes: int, rng, phi: float = 4.0) -> MixedBatch:
    """One mixed sample per clean batch member, partner drawn with replacement from the same members."""
    features = np.asarray(features, dtype=np.float64)
    n = len(features)
    if n == 0:
        return MixedBatch(
            np.zeros((0,) + features.shape[1:]), np.zeros((0, num_classes)), np.zeros(0), np.zeros((0, 2), int)
        )
    confidences = np.asarray(confidences)
    partner = rng.integers(0, n, size=n)
    lam = draw_coefficient(rng, phi, size=n)
    y = one_hot(np.asarray(labels, dtype=np.int64), num_classes)
    x_mix, y_mix = mix(features, features[partner], y, y[partner], confidences, confidences[partner], lam)
    donors = np.stack([np.arange(n), partner], axis=1)
    return MixedBatch(x_mix, y_mix, lam, donors)
