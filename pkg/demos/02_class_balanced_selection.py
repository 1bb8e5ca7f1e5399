"""Small-loss selection with a per-class quota, scored against the hidden labels."""

import numpy as np

from balsel import dataset as ds
from balsel import selection as sel
from balsel.evaluation import selection_quality
from balsel.trainer import RunConfig, Trainer

# the hand example: quota floor(0.5 * 6 / 2) = 1 per class
rec = sel.LossRecords(ids=np.arange(1, 7), raw=np.array([0.1, 0.9, 0.2, 0.3, 0.8, 0.95]),
                      classes=np.array([0, 0, 1, 1, 1, 1]))
print("hand example clean ids:", sorted(sel.select(rec, 0.5, 2).clean_ids.tolist()))

spec = ds.DatasetSpec(num_classes=10, base_count=1225, imbalance_factor=10, noise_rate=0.4)
train = ds.make_dataset(spec)
cfg = RunConfig(noise_rate=0.4, warmup_epochs=15, total_epochs=16, batch_size=64)
trainer = Trainer(cfg, train.training_view())
for epoch in range(1, 16):
    trainer.run_epoch(epoch)

part, records, _ = trainer.partition()
q = selection_quality(part, train)
print("quota per class:", part.quota.tolist())
print("precision %.3f  recall %.3f  (prior %.2f)" % (q.precision, q.recall, 1 - 0.4))

# the quota is the binding constraint: tail classes are taken whole
clean = train.observed_labels == train.true_labels
for c in range(10):
    members = train.observed_labels == c
    print("class %d  observed %4d  truly clean %4d  selected %4d" %
          (c, members.sum(), (members & clean).sum(), q.per_class_clean_counts[c]))
