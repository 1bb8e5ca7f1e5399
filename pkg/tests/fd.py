"""Central finite-difference oracle for MLP objectives."""

import numpy as np

from balsel import model as mlp


def numeric_grad(model, objective, step=1e-4):
    grads = {}
    for name in mlp.PARAM_NAMES:
        p = getattr(model, name)
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = objective(model)[0]
            p[idx] = orig - step
            down = objective(model)[0]
            p[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def fd_check(model, objective, step=1e-4):
    """Max elementwise relative error between analytic and numeric gradients."""
    _, analytic = objective(model)
    numeric = numeric_grad(model, objective, step)
    worst = 0.0
    for name in mlp.PARAM_NAMES:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def kink_margin(model, *inputs):
    """Smallest |hidden pre-activation| over the inputs.

    Central differences straddle the ReLU kink when this is below the step,
    and the numeric derivative is then meaningless.
    """
    return min(float(np.abs(np.atleast_2d(x) @ model.W1 + model.b1).min()) for x in inputs)
