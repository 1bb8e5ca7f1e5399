"""One-hidden-layer ReLU softmax classifier with hand-written backprop.

All math runs in float64. Gradients are returned as dicts keyed like the
parameters (``W1``, ``b1``, ``W2``, ``b2``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("W1", "b1", "W2", "b2")
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class MLP:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    velocity: dict = field(default_factory=dict)
    epoch: int = 0

    def __post_init__(self):
        if not self.velocity:
            self.velocity = {k: np.zeros_like(getattr(self, k)) for k in PARAM_NAMES}

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.W2.shape[1]

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def copy(self) -> "MLP":
        return MLP(
            *(getattr(self, k).copy() for k in PARAM_NAMES),
            velocity={k: v.copy() for k, v in self.velocity.items()},
            epoch=self.epoch,
        )


def init_mlp(input_dim: int, hidden_dim: int, num_classes: int, rng) -> MLP:
    """Fan-in scaled uniform weights, zero biases."""
    b1 = 1.0 / math.sqrt(input_dim)
    b2 = 1.0 / math.sqrt(hidden_dim)
    return MLP(
        W1=rng.uniform(-b1, b1, size=(input_dim, hidden_dim)),
        b1=np.zeros(hidden_dim),
        W2=rng.uniform(-b2, b2, size=(hidden_dim, num_classes)),
        b2=np.zeros(num_classes),
    )


def zero_grad(model: MLP) -> dict:
    return {k: np.zeros_like(v) for k, v in model.params().items()}


def add_grads(a: dict, b: dict, scale: float = 1.0) -> dict:
    return {k: a[k] + scale * b[k] for k in a}


def _as_batch(model: MLP, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} features, got {x.shape[-1]}")
    return x


def _forward(model: MLP, x: np.ndarray):
    pre = x @ model.W1 + model.b1
    h = np.maximum(pre, 0.0)
    logits = h @ model.W2 + model.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return (x, pre, h), log_p


def _backward(model: MLP, cache, dlogits: np.ndarray) -> dict:
    x, pre, h = cache
    dh = (dlogits @ model.W2.T) * (pre > 0)
    return {
        "W1": x.T @ dh,
        "b1": dh.sum(axis=0),
        "W2": h.T @ dlogits,
        "b2": dlogits.sum(axis=0),
    }


def log_probs(model: MLP, x) -> np.ndarray:
    return _forward(model, _as_batch(model, x))[1]


def forward(model: MLP, x) -> np.ndarray:
    """Softmax probabilities, shape (n, C) (or (C,) for a single vector)."""
    single = np.asarray(x).ndim == 1
    p = np.exp(log_probs(model, x))
    return p[0] if single else p


def predict(model: MLP, x) -> np.ndarray:
    return np.argmax(log_probs(model, x), axis=1)


def _check_targets(y: np.ndarray, n: int, c: int):
    if y.shape != (n, c):
        raise ValueError(f"targets must have shape {(n, c)}, got {y.shape}")
    if np.any(y < 0) or np.any(np.abs(y.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("each soft target must be a probability distribution")


def loss_and_grad(model: MLP, x, y, weights=None):
    """Weighted soft-target cross-entropy ``sum w_i l_i / sum w_i`` and its gradient."""
    x = _as_batch(model, x)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    y = np.asarray(y, dtype=np.float64).reshape(n, -1)
    _check_targets(y, n, model.num_classes)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be nonnegative with positive sum")
    cache, log_p = _forward(model, x)
    per_sample = -(y * log_p).sum(axis=1)
    total = w.sum()
    loss = float(w @ per_sample / total)
    # y rows sum to one, so d l_i / d logits = p_i - y_i
    dlogits = (w / total)[:, None] * (np.exp(log_p) - y)
    return loss, _backward(model, cache, dlogits)


def entropy_loss_and_grad(model: MLP, x):
    """Mean prediction entropy ``-sum_c p log p`` and its gradient."""
    x = _as_batch(model, x)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    cache, log_p = _forward(model, x)
    p = np.exp(log_p)
    ent = -(p * log_p).sum(axis=1)
    dlogits = -p * (log_p + ent[:, None]) / n
    return float(ent.mean()), _backward(model, cache, dlogits)


def sgd_step(model: MLP, grads: dict, lr: float, momentum: float = 0.9, weight_decay: float = 0.0):
    """Classical momentum: ``v <- m v + g``; ``theta <- theta - lr v``. In place."""
    if lr < 0:
        raise ValueError("lr must be >= 0")
    for k in PARAM_NAMES:
        p = getattr(model, k)
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {k} {p.shape}")
        if weight_decay:
            g = g + weight_decay * p
        v = momentum * model.velocity[k] + g
        model.velocity[k] = v
        setattr(model, k, p - lr * v)
    return model


def cosine_lr(initial_lr: float, t: float, total: float) -> float:
    return initial_lr * 0.5 * (1.0 + math.cos(math.pi * t / total))


def save_checkpoint(model: MLP, path, metadata: dict | None = None) -> None:
    arrays = {k: v for k, v in model.params().items()}
    arrays.update({f"v_{k}": v for k, v in model.velocity.items()})
    with open(path, "wb") as fh:
        np.savez(
            fh,
            version=np.array(CHECKPOINT_VERSION),
            epoch=np.array(model.epoch),
            metadata=np.array(json.dumps(metadata or {}, sort_keys=True)),
            **arrays,
        )


def load_checkpoint(path):
    """Return ``(model, metadata)``."""
    with np.load(path, allow_pickle=False) as z:
        if "version" not in z.files:
            raise CheckpointError("not a checkpoint file")
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {int(z['version'])}")
        model = MLP(
            *(z[k].copy() for k in PARAM_NAMES),
            velocity={k: z[f"v_{k}"].copy() for k in PARAM_NAMES},
            epoch=int(z["epoch"]),
        )
        meta = json.loads(str(z["metadata"]))
    return model, meta
