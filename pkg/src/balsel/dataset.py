"""Synthetic class-imbalanced Gaussian blobs with uniform label noise.

Class ``i`` receives ``round(n_0 * mu**i)`` samples where
``mu = IF ** (-1 / (C - 1))``, so the head/tail count ratio equals the
imbalance factor. Ground-truth labels travel with the dataset but are only
reachable through :attr:`Dataset.true_labels`; the training code works on a
:class:`TrainingView`, which does not carry them.
"""

from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CBSD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")

# Sub-streams of the DatasetSpec seed. Centroids are shared by the train and test
# splits; the sample draws are not.
_CENTROID_STREAM = 0
_TRAIN_STREAM = 1
_TEST_STREAM = 2
_NOISE_STREAM = 3


class DatasetFormatError(ValueError):
    """Raised for bad magic, unsupported versions or corrupted records."""


@dataclass(frozen=True)
class DatasetSpec:
    num_classes: int = 10
    base_count: int = 500
    imbalance_factor: float = 1.0
    noise_rate: float = 0.0
    feature_dim: int = 32
    class_separation: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.base_count < 1:
            raise ValueError("base_count must be >= 1")
        if self.imbalance_factor < 1:
            raise ValueError("imbalance_factor must be >= 1")
        if not 0 <= self.noise_rate < 1:
            raise ValueError("noise_rate must lie in [0, 1)")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.class_separation <= 0:
            raise ValueError("class_separation must be > 0")

    @property
    def decay_ratio(self) -> float:
        return float(self.imbalance_factor ** (-1.0 / (self.num_classes - 1)))

    def class_sizes(self) -> np.ndarray:
        mu = self.decay_ratio
        sizes = np.array(
            [round(self.base_count * mu**i) for i in range(self.num_classes)],
            dtype=np.int64,
        )
        if sizes.min() < 1:
            raise ValueError(
                f"imbalance factor {self.imbalance_factor} leaves an empty class "
                f"with base_count={self.base_count}"
            )
        return sizes


def base_count_for_total(total: int, num_classes: int, imbalance_factor: float) -> int:
    """Smallest head-class count whose imbalanced profile sums to at least ``total``."""
    mu = imbalance_factor ** (-1.0 / (num_classes - 1))
    n0 = max(1, int(np.floor(total / np.sum(mu ** np.arange(num_classes)))))
    while sum(round(n0 * mu**i) for i in range(num_classes)) < total:
        n0 += 1
    return n0


@dataclass(frozen=True, eq=False)
class TrainingView:
    """What a training loop is allowed to see: ids, features, observed labels."""

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __len__(self):
        return len(self.ids)


class Dataset:
    """Immutable container of samples plus their hidden ground truth.

    ``features`` are stored as float32 (the on-disk precision); arrays are
    made read-only on construction.
    """

    def __init__(self, ids, features, observed_labels, true_labels, num_classes: int):
        ids = np.asarray(ids, dtype=np.uint64)
        features = np.asarray(features, dtype=np.float32)
        observed = np.asarray(observed_labels, dtype=np.int64)
        true = np.asarray(true_labels, dtype=np.int64)
        n = len(ids)
        if features.ndim != 2 or features.shape[0] != n:
            raise ValueError("features must be an (N, d) array")
        if observed.shape != (n,) or true.shape != (n,):
            raise ValueError("label arrays must have shape (N,)")
        if len(np.unique(ids)) != n:
            raise ValueError("sample ids must be unique")
        for name, lab in (("observed", observed), ("true", true)):
            if n and (lab.min() < 0 or lab.max() >= num_classes):
                raise ValueError(f"{name} labels outside [0, {num_classes})")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        for arr in (ids, features, observed, true):
            arr.setflags(write=False)
        self.ids = ids
        self.features = features
        self.observed_labels = observed
        self._true_labels = true
        self.num_classes = int(num_classes)

    @property
    def true_labels(self) -> np.ndarray:
        # Oracle access. Only the evaluation helpers go through here.
        return self._true_labels

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.features.shape == other.features.shape
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.observed_labels, other.observed_labels)
            and np.array_equal(self._true_labels, other._true_labels)
            and self.features.tobytes() == other.features.tobytes()
        )

    def training_view(self) -> TrainingView:
        return TrainingView(
            ids=self.ids,
            features=self.features,
            labels=self.observed_labels,
            num_classes=self.num_classes,
        )

    def with_observed_labels(self, observed) -> "Dataset":
        return Dataset(self.ids, self.features, observed, self._true_labels, self.num_classes)

    def noise_mask(self) -> np.ndarray:
        return self.observed_labels != self._true_labels


def class_centroids(spec: DatasetSpec) -> np.ndarray:
    """Centroids with pairwise distance >= ``class_separation``.

    With ``d >= C`` the centroids are a randomly rotated regular simplex
    (all pairwise distances equal the separation). Otherwise random
    Gaussian points are rescaled so their closest pair sits at the
    separation.
    """
    rng = np.random.default_rng([spec.seed, _CENTROID_STREAM])
    c, d = spec.num_classes, spec.feature_dim
    if d >= c:
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        return (spec.class_separation / np.sqrt(2.0)) * q[:c]
    pts = rng.standard_normal((c, d))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    closest = dist[np.triu_indices(c, 1)].min()
    return pts * (spec.class_separation / closest)


def _draw(spec: DatasetSpec, sizes: np.ndarray, stream: int) -> Dataset:
    centroids = class_centroids(spec)
    rng = np.random.default_rng([spec.seed, stream])
    labels = np.repeat(np.arange(spec.num_classes), sizes)
    feats = centroids[labels] + rng.standard_normal((len(labels), spec.feature_dim))
    ids = np.arange(len(labels), dtype=np.uint64)
    return Dataset(ids, feats, labels, labels, spec.num_classes)


def generate_blobs(spec: DatasetSpec) -> Dataset:
    """Clean imbalanced training blobs (observed == true)."""
    return _draw(spec, spec.class_sizes(), _TRAIN_STREAM)


def generate_test_split(spec: DatasetSpec, per_class: int = 100) -> Dataset:
    """Balanced, clean held-out split sharing the training centroids."""
    sizes = np.full(spec.num_classes, per_class, dtype=np.int64)
    return _draw(spec, sizes, _TEST_STREAM)


def uniform_transition_matrix(noise_rate: float, num_classes: int) -> np.ndarray:
    t = np.full((num_classes, num_classes), noise_rate / (num_classes - 1))
    np.fill_diagonal(t, 1.0 - noise_rate)
    return t


def inject_uniform_noise(dataset: Dataset, noise_rate: float, seed) -> Dataset:
    """Flip each label with probability ``noise_rate`` to one of the other classes."""
    if not 0 <= noise_rate < 1:
        raise ValueError("noise_rate must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    n, c = len(dataset), dataset.num_classes
    flip = rng.random(n) < noise_rate
    offset = rng.integers(1, c, size=n)
    true = dataset.true_labels
    observed = np.where(flip, (true + offset) % c, true)
    return dataset.with_observed_labels(observed)


def make_dataset(spec: DatasetSpec) -> Dataset:
    """Blobs for ``spec`` with its noise rate applied."""
    clean = generate_blobs(spec)
    return inject_uniform_noise(clean, spec.noise_rate, [spec.seed, _NOISE_STREAM])


def class_counts(dataset) -> np.ndarray:
    """Per-class counts of the observed labels."""
    labels = dataset.labels if isinstance(dataset, TrainingView) else dataset.observed_labels
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=dataset.num_classes)


def _record_dtype(d: int) -> np.dtype:
    return np.dtype(
        [("id", "<u8"), ("observed", "<u4"), ("true", "<u4"), ("x", "<f4", (d,)), ("crc", "<u4")]
    )


def save(dataset: Dataset, path) -> None:
    """Write the binary ``CBSD`` format (little-endian, CRC32 per record)."""
    d = dataset.feature_dim
    dt = _record_dtype(d)
    rec = np.zeros(len(dataset), dtype=dt)
    rec["id"] = dataset.ids
    rec["observed"] = dataset.observed_labels
    rec["true"] = dataset.true_labels
    rec["x"] = dataset.features
    body = dt.itemsize - 4
    raw = rec.view(np.uint8).reshape(len(rec), dt.itemsize)
    rec["crc"] = [zlib.crc32(row[:body].tobytes()) for row in raw]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dataset.num_classes, d, len(dataset)))
        fh.write(rec.tobytes())


def load(path) -> Dataset:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise DatasetFormatError("file too short for header")
    magic, version, c, d, n = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format version {version}")
    dt = _record_dtype(d)
    payload = blob[_HEADER.size:]
    if len(payload) != n * dt.itemsize:
        raise DatasetFormatError(f"expected {n} records, payload has {len(payload)} bytes")
    rec = np.frombuffer(payload, dtype=dt)
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(n, dt.itemsize)
    body = dt.itemsize - 4
    for i in range(n):
        if zlib.crc32(raw[i, :body].tobytes()) != rec["crc"][i]:
            raise DatasetFormatError(f"checksum mismatch in record {i}")
    features = rec["x"].reshape(n, d)
    return Dataset(rec["id"], features, rec["observed"], rec["true"], c)


def export_csv(dataset: Dataset, path) -> None:
    d = dataset.feature_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "observed", "true"] + [f"f{k}" for k in range(d)])
        for i in range(len(dataset)):
            w.writerow(
                [int(dataset.ids[i]), int(dataset.observed_labels[i]), int(dataset.true_labels[i])]
                + [repr(float(v)) for v in dataset.features[i]]
            )
