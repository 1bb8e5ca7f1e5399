"""EMA soft labels, confidence margins and the ACM mask on hand-made traces."""

import numpy as np

from balsel import correction as cor

print("CM of [0.7, 0.2, 0.1]:", cor.confidence_margin([0.7, 0.2, 0.1]))

t = cor.SampleTracker(1, 2)
t.ema_update([0], [[1.0, 0.0]], 0.6)
print("EMA after [0.5, 0.5] at 0.6:", t.ema_update([0], [[0.5, 0.5]], 0.6)[0])


def replay(trace):
    tr = cor.SampleTracker(1, len(trace[0]))
    for p in trace:
        tr.ema_update([0], [p], 0.0)
        tr.accumulate_margins([0])
    return tr.acm([0])[0]


stable = [[0.8, 0.2]] * 6
flip = [[0.8, 0.2], [0.2, 0.8]] * 3
print("stable ACM %.3f  flip-flop ACM %.3f" % (replay(stable), replay(flip)))

rng = np.random.default_rng(0)
acm = rng.uniform(-0.5, 1.0, 12)
for tau in (0.0, 0.2, 0.5, 1.0):
    thr = cor.compute_threshold(acm, tau)
    kept = cor.keep_mask(acm, thr)
    print("tau %.1f  T %.3f  kept %2d of %d" % (tau, thr, kept.sum(), len(acm)))
