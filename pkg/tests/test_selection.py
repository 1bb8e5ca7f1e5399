import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balsel import model as mlp
from balsel import selection as sel
from balsel.dataset import Dataset
from balsel.evaluation import selection_quality

from .oracles import brute_force_select


def records(ids, raw, classes):
    return sel.LossRecords(np.asarray(ids), np.asarray(raw, float), np.asarray(classes))


def test_raw_loss_is_negative_log_prob():
    net = mlp.MLP(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 3)), np.log([1.0, 1e-300, 1e-300]))
    r = sel.compute_losses(net, np.zeros((1, 1)), [0], [0])
    assert r.raw[0] == pytest.approx(0.0, abs=1e-12)
    e = np.e
    net = mlp.MLP(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 2)), np.log([1 / e, 1 - 1 / e]))
    r = sel.compute_losses(net, np.zeros((3, 1)), [0, 0, 1], [5, 6, 7])
    assert r.raw[0] == pytest.approx(1.0)
    assert len(r.ids) == 3


def test_compute_losses_does_not_touch_parameters():
    rng = np.random.default_rng(0)
    net = mlp.init_mlp(3, 4, 2, rng)
    before = net.W1.copy()
    sel.compute_losses(net, rng.standard_normal((5, 3)), [0, 1, 0, 1, 1], range(5))
    assert np.array_equal(net.W1, before)


def test_normalize_examples():
    assert sel.normalize([2.0, 4.0, 6.0]).tolist() == [0.0, 0.5, 1.0]
    assert sel.normalize([3.3, 3.3, 3.3]).tolist() == [0.0, 0.0, 0.0]
    z = sel.normalize(np.random.default_rng(1).random(50) * 7)
    assert z.min() == 0.0 and z.max() == 1.0


def test_select_hand_example():
    r = records([1, 2, 3, 4, 5, 6], [0.1, 0.9, 0.2, 0.3, 0.8, 0.95], [0, 0, 1, 1, 1, 1])
    p = sel.select(r, rho=0.5, num_classes=2)
    assert p.quota.tolist() == [1, 1]
    assert p.clean_ids.tolist() == [1, 3]
    assert p.noisy_ids.tolist() == [2, 4, 5, 6]


def test_empty_class_gets_zero_quota():
    r = records([0, 1, 2, 3], [0.1, 0.2, 0.3, 0.4], [0, 0, 2, 2])
    p = sel.select(r, rho=1.0, num_classes=3)
    assert p.quota[1] == 0
    assert set(p.clean_ids) | set(p.noisy_ids) == {0, 1, 2, 3}


def test_ties_break_by_id():
    r = records([9, 3, 5], [1.0, 1.0, 1.0], [0, 0, 0])
    p = sel.select(r, rho=1 / 3, num_classes=1)
    assert p.clean_ids.tolist() == [3]


@pytest.mark.parametrize("rho", [0.0, -0.1, 1.01])
def test_rho_validation(rho):
    with pytest.raises(ValueError):
        sel.select(records([0], [1.0], [0]), rho=rho, num_classes=1)


def test_random_instance_matches_oracle():
    rng = np.random.default_rng(7)
    ids = rng.permutation(10_000)[:200]
    raw = rng.exponential(size=200)
    classes = rng.integers(0, 5, 200)
    p = sel.select(records(ids, raw, classes), 0.6, 5)
    assert set(p.clean_ids.tolist()) == brute_force_select(ids.tolist(), raw.tolist(), classes.tolist(), 0.6, 5)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 400),
    st.integers(1, 12),
    st.floats(0.05, 1.0),
    st.integers(0, 2**32 - 1),
    st.floats(1e-3, 1e3),
)
def test_partition_invariants(n, c, rho, seed, k):
    rng = np.random.default_rng(seed)
    # skewed class frequencies so some classes sit below the quota
    probs = rng.dirichlet(np.full(c, 0.5))
    classes = rng.choice(c, size=n, p=probs)
    ids = rng.permutation(n * 3)[:n]
    raw = rng.gamma(2.0, size=n)
    p = sel.select(records(ids, raw, classes), rho, c)
    clean, noisy = set(p.clean_ids.tolist()), set(p.noisy_ids.tolist())
    assert not clean & noisy and clean | noisy == set(ids.tolist())
    cap = int(np.floor(rho * n / c))
    by_id = dict(zip(ids.tolist(), classes.tolist()))
    per_class = np.bincount([by_id[i] for i in clean], minlength=c)
    counts = np.bincount(classes, minlength=c)
    assert np.all(per_class == np.minimum(cap, counts))
    assert np.all(per_class <= cap)
    for cls in np.flatnonzero(counts <= cap):
        assert all(i in clean for i in ids[classes == cls])
    scaled = sel.select(records(ids, raw * k, classes), rho, c)
    assert np.array_equal(scaled.clean_ids, p.clean_ids)


def _truth_dataset():
    # 8 samples, ids 0..7, flips at ids 2 and 5
    true = [0, 0, 0, 0, 1, 1, 1, 1]
    obs = [0, 0, 1, 0, 1, 0, 1, 1]
    return Dataset(np.arange(8), np.zeros((8, 1)), obs, true, 2)


def test_selection_quality_hand_count():
    d = _truth_dataset()
    p = sel.Partition(np.array([0, 1, 2, 4]), np.array([3, 5, 6, 7]), np.array([2, 2]))
    q = selection_quality(p, d)
    # clean picks 0,1,2,4: 0,1,4 are truly clean -> 3/4; truly clean total 6 -> recall 3/6
    assert q.precision == pytest.approx(0.75)
    assert q.recall == pytest.approx(0.5)
    assert q.per_class_clean_counts == [2, 2]


def test_selection_quality_degenerate_and_noise_free():
    d = _truth_dataset()
    q = selection_quality(sel.Partition(np.array([], int), np.arange(8), np.array([0, 0])), d)
    assert q.precision == 0.0 and q.recall == 0.0
    clean = Dataset(np.arange(4), np.zeros((4, 1)), [0, 1, 0, 1], [0, 1, 0, 1], 2)
    q = selection_quality(sel.Partition(np.array([1, 3]), np.array([0, 2]), np.array([1, 1])), clean)
    assert q.precision == 1.0


def test_partition_csv(tmp_path):
    r = records([1, 2, 3], [0.1, 0.5, 0.3], [0, 0, 1])
    p = sel.select(r, 0.7, 2)
    path = tmp_path / "part.csv"
    sel.write_partition_csv(path, 4, p, r)
    sel.write_partition_csv(path, 5, p, r)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,sample_id,flag,normalized_loss"
    assert len(lines) == 7
    assert lines[1].startswith("4,1,clean,")
