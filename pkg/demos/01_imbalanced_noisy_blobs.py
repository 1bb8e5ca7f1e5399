"""Build a long-tailed blobs dataset, flip labels, and round-trip it to disk."""

import tempfile
from pathlib import Path

import numpy as np

from balsel import dataset as ds

spec = ds.DatasetSpec(num_classes=10, base_count=500, imbalance_factor=50, noise_rate=0.4, seed=1)
print("decay ratio per class:", round(spec.decay_ratio, 4))
print("class sizes:", spec.class_sizes().tolist())  # head 500, tail 10

train = ds.make_dataset(spec)
print("observed counts:", ds.class_counts(train).tolist())
print("flipped fraction: %.3f" % train.noise_mask().mean())

# where does the tail class's observed set come from?
tail = train.observed_labels == 9
print("tail observed set: %d samples, %d truly tail" % (tail.sum(), np.sum(train.true_labels[tail] == 9)))

# the training side only ever sees this view
view = train.training_view()
print("view has true_labels:", hasattr(view, "true_labels"))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "blobs.cbsd"
    ds.save(train, path)
    print("file bytes:", path.stat().st_size, " equal after load:", ds.load(path) == train)

test = ds.generate_test_split(spec, per_class=100)
print("test split counts:", ds.class_counts(test).tolist(), " noisy:", int(test.noise_mask().sum()))
