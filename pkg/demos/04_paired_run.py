"""One paired comparison at IF=10, 40% noise: the full method against plain cross-entropy."""

import time

from balsel import dataset as ds
from balsel.evaluation import Monitor
from balsel.trainer import RunConfig, run

spec = ds.DatasetSpec(num_classes=10, base_count=1225, imbalance_factor=10, noise_rate=0.4)
train = ds.make_dataset(spec)
test = ds.generate_test_split(spec, 100)
monitor = Monitor(test, train)

results = {}
for method in ("standard", "ours"):
    cfg = RunConfig(noise_rate=0.4, method=method, batch_size=64, strong_sigma=0.3, strong_mask_prob=0.7)
    t0 = time.perf_counter()
    results[method] = run(cfg, train.training_view(), monitor)
    print("%-8s last-10 %.4f  best %.4f  (%.1fs)" % (
        method, results[method].last_k_accuracy(), results[method].best_accuracy(), time.perf_counter() - t0))

print("delta: %+.2f points" % (100 * (results["ours"].last_k_accuracy() - results["standard"].last_k_accuracy())))

for r in results["ours"].reports[14:20]:
    print(r.epoch, r.stage, "lr %.4f" % r.lr, "acc %.3f" % r.test_accuracy,
          "masked %s" % (None if r.masked_fraction is None else round(r.masked_fraction, 3)))
