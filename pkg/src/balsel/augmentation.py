"""Feature-space weak and strong views.

The weak view adds small Gaussian jitter. The strong view adds larger
jitter and then zeroes each coordinate independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    weak_sigma: float = 0.05
    strong_sigma: float = 0.2
    strong_mask_prob: float = 0.2

    def __post_init__(self):
        if self.weak_sigma < 0 or self.strong_sigma < 0:
            raise ValueError("augmentation sigmas must be >= 0")
        if not 0 <= self.strong_mask_prob <= 1:
            raise ValueError("strong_mask_prob must lie in [0, 1]")

    @property
    def strong_dominates(self) -> bool:
        return self.strong_sigma >= self.weak_sigma and self.strong_mask_prob > 0


def weak(x, rng, config: AugmentConfig = AugmentConfig()) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if config.weak_sigma == 0:
        return x.copy()
    return x + config.weak_sigma * rng.standard_normal(x.shape)


def strong(x, rng, config: AugmentConfig = AugmentConfig()) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = x + config.strong_sigma * rng.standard_normal(x.shape) if config.strong_sigma else x.copy()
    if config.strong_mask_prob:
        out = np.where(rng.random(x.shape) < config.strong_mask_prob, 0.0, out)
    return out
