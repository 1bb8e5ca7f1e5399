"""Robust training for class-imbalanced data with noisy labels."""

from .dataset import (
    Dataset,
    DatasetSpec,
    class_counts,
    generate_blobs,
    generate_test_split,
    inject_uniform_noise,
    load,
    make_dataset,
    save,
)
from .evaluation import Monitor, evaluate, selection_quality
from .trainer import RunConfig, run

__all__ = [
    "Dataset",
    "DatasetSpec",
    "Monitor",
    "RunConfig",
    "class_counts",
    "evaluate",
    "generate_blobs",
    "generate_test_split",
    "inject_uniform_noise",
    "load",
    "make_dataset",
    "run",
    "save",
    "selection_quality",
]

__version__ = "0.1.0"
