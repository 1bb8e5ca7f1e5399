import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balsel import model as mlp

from .fd import fd_check


def small_net(seed=0, d=5, h=7, c=4):
    rng = np.random.default_rng(seed)
    net = mlp.init_mlp(d, h, c, rng)
    net.b1 = rng.normal(0, 0.3, h)
    net.b2 = rng.normal(0, 0.3, c)
    return net, rng


def zero_net(d=3, h=4, c=5):
    return mlp.MLP(np.zeros((d, h)), np.zeros(h), np.zeros((h, c)), np.zeros(c))


def test_zero_net_is_uniform():
    p = mlp.forward(zero_net(), np.ones(3))
    assert np.allclose(p, 0.2)


def test_softmax_is_stable_for_huge_logits():
    net = mlp.MLP(np.eye(2), np.zeros(2), np.eye(2), np.zeros(2))
    p = mlp.forward(net, np.array([1000.0, 0.0]))
    assert np.all(np.isfinite(p))
    assert p[0] == pytest.approx(1.0) and p[1] == pytest.approx(0.0, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 50))
def test_probabilities_sum_to_one(seed, scale):
    net, rng = small_net(seed)
    p = mlp.forward(net, scale * rng.standard_normal((6, 5)))
    assert np.all(p > 0) or scale > 10
    assert np.all(np.abs(p.sum(axis=1) - 1) <= 1e-6)


def test_forward_is_pure():
    net, rng = small_net(3)
    x = rng.standard_normal((10, 5))
    assert mlp.forward(net, x).tobytes() == mlp.forward(net, x).tobytes()


def test_dimension_mismatch():
    net, _ = small_net()
    with pytest.raises(ValueError):
        mlp.forward(net, np.zeros(4))


def _fixed_prob_net(p):
    """A net whose output is log(p) for any input (bias-only)."""
    c = len(p)
    return mlp.MLP(np.zeros((1, 1)), np.zeros(1), np.zeros((1, c)), np.log(np.asarray(p, float)))


def test_cross_entropy_value():
    net = _fixed_prob_net([0.9, 0.1])
    loss, _ = mlp.loss_and_grad(net, np.zeros((1, 1)), np.array([[1.0, 0.0]]))
    assert loss == pytest.approx(0.10536051565782628, rel=1e-12)


def test_target_equal_prediction_gives_zero_logit_grad():
    net = _fixed_prob_net([0.2, 0.5, 0.3])
    _, g = mlp.loss_and_grad(net, np.zeros((2, 1)), np.array([[0.2, 0.5, 0.3]] * 2))
    assert np.allclose(g["b2"], 0.0, atol=1e-15)


def test_weighted_loss_is_weighted_mean():
    net, rng = small_net(1)
    x = rng.standard_normal((4, 5))
    y = np.eye(4)
    w = np.array([1.0, 0.0, 2.0, 3.0])
    per = [mlp.loss_and_grad(net, x[i:i + 1], y[i:i + 1])[0] for i in range(4)]
    loss, _ = mlp.loss_and_grad(net, x, y, w)
    assert loss == pytest.approx(np.dot(w, per) / w.sum(), rel=1e-12)


def test_loss_input_validation():
    net, _ = small_net()
    with pytest.raises(ValueError, match="empty"):
        mlp.loss_and_grad(net, np.zeros((0, 5)), np.zeros((0, 4)))
    with pytest.raises(ValueError, match="distribution"):
        mlp.loss_and_grad(net, np.zeros((1, 5)), np.array([[0.5, 0.6, 0, 0]]))
    with pytest.raises(ValueError, match="empty"):
        mlp.entropy_loss_and_grad(net, np.zeros((0, 5)))


def test_entropy_of_uniform_is_log_c():
    ent, _ = mlp.entropy_loss_and_grad(zero_net(c=10), np.ones((3, 3)))
    assert ent == pytest.approx(math.log(10), rel=1e-12)


def test_entropy_of_near_one_hot_vanishes():
    net = _fixed_prob_net([1 - 1e-12, 1e-12 / 2, 1e-12 / 2])
    ent, _ = mlp.entropy_loss_and_grad(net, np.zeros((1, 1)))
    assert ent < 1e-9


def _soft_targets(rng, n, c):
    y = rng.random((n, c)) ** 3
    return y / y.sum(axis=1, keepdims=True)


@pytest.mark.parametrize("seed", range(5))
def test_soft_cross_entropy_gradient(seed):
    net, rng = small_net(seed)
    x = rng.standard_normal((8, 5))
    y = _soft_targets(rng, 8, 4)
    w = rng.random(8)
    assert fd_check(net, lambda m: mlp.loss_and_grad(m, x, y, w)) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_entropy_gradient(seed):
    net, rng = small_net(seed)
    x = rng.standard_normal((8, 5))
    assert fd_check(net, lambda m: mlp.entropy_loss_and_grad(m, x)) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_warmup_objective_gradient(seed):
    net, rng = small_net(seed)
    x = rng.standard_normal((8, 5))
    y = np.eye(4)[rng.integers(0, 4, 8)]

    def objective(m):
        a, ga = mlp.loss_and_grad(m, x, y)
        b, gb = mlp.entropy_loss_and_grad(m, x)
        return a + b, mlp.add_grads(ga, gb)

    assert fd_check(net, objective) < 1e-4


def test_sgd_zero_lr_only_moves_velocity():
    net, _ = small_net()
    before = {k: v.copy() for k, v in net.params().items()}
    g = {k: np.ones_like(v) for k, v in before.items()}
    mlp.sgd_step(net, g, lr=0.0)
    for k in before:
        assert np.array_equal(getattr(net, k), before[k])
        assert np.array_equal(net.velocity[k], g[k])


def test_sgd_without_momentum_is_vanilla():
    net, rng = small_net()
    before = {k: v.copy() for k, v in net.params().items()}
    g = {k: rng.standard_normal(v.shape) for k, v in before.items()}
    mlp.sgd_step(net, g, lr=0.3, momentum=0.0)
    for k in before:
        assert np.allclose(getattr(net, k), before[k] - 0.3 * g[k])


def test_momentum_two_step_displacement():
    net, rng = small_net()
    before = {k: v.copy() for k, v in net.params().items()}
    g = {k: rng.standard_normal(v.shape) for k, v in before.items()}
    mlp.sgd_step(net, g, lr=1.0, momentum=0.9)
    mlp.sgd_step(net, g, lr=1.0, momentum=0.9)
    # v1 = g, v2 = 0.9 g + g: displacement g (1 + 1.9)
    for k in before:
        assert np.allclose(before[k] - getattr(net, k), 2.9 * g[k])


def test_sgd_shape_mismatch():
    net, _ = small_net()
    g = mlp.zero_grad(net)
    g["W1"] = np.zeros((1, 1))
    with pytest.raises(ValueError):
        mlp.sgd_step(net, g, 0.1)


def test_cosine_endpoints():
    assert mlp.cosine_lr(0.01, 0, 50) == 0.01
    assert mlp.cosine_lr(0.01, 50, 50) == pytest.approx(0.0, abs=1e-18)
    assert mlp.cosine_lr(0.01, 25, 50) == pytest.approx(0.005)
    lrs = [mlp.cosine_lr(0.01, t, 50) for t in range(51)]
    assert all(0 <= v <= 0.01 for v in lrs)
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_checkpoint_roundtrip(tmp_path):
    net, rng = small_net(4)
    mlp.sgd_step(net, {k: rng.standard_normal(v.shape) for k, v in net.params().items()}, 0.1)
    net.epoch = 12
    p = tmp_path / "ck.bin"
    mlp.save_checkpoint(net, p, {"note": "x"})
    back, meta = mlp.load_checkpoint(p)
    assert meta == {"note": "x"} and back.epoch == 12
    for k in mlp.PARAM_NAMES:
        assert np.array_equal(getattr(back, k), getattr(net, k))
        assert np.array_equal(back.velocity[k], net.velocity[k])
