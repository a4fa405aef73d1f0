"""Finite-difference verification of the analytic backward pass."""

import numpy as np

from .network import NetworkParams, network_backward, network_loss

# Denominator floor for the relative error.  Central differences carry
# cancellation noise of about eps * |loss| / (2h) ~ 1e-11 at h = 1e-5, so
# gradients below ~1e-7 cannot be compared relatively; the floor absorbs that
# band while leaving every meaningful gradient checked at full sharpness.
DENOM_FLOOR = 1e-6


def finite_diff_grad_check(params: NetworkParams, batch, labels, loss: str = "bce",
                           step: float = 1e-5, dropout_seed: int = 0) -> float:
    """Max over all trainable parameters of the relative disagreement between
    analytic gradients and central finite differences.

    The dropout seed is held fixed so both passes see the same mask.  The
    relative error per parameter is
    |analytic - numeric| / max(DENOM_FLOOR, |analytic| + |numeric|).
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-7, 1e-3]")
    _, grads, _ = network_backward(batch, labels, params, loss, "train", dropout_seed)
    worst = 0.0
    for name, arr in params.trainable().items():
        flat = arr.ravel()
        gflat = grads[name].ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = network_loss(batch, labels, params, loss, "train", dropout_seed)
            flat[idx] = orig - step
            down = network_loss(batch, labels, params, loss, "train", dropout_seed)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * step)
            analytic = gflat[idx]
            err = abs(analytic - numeric) / max(DENOM_FLOOR,
                                                abs(analytic) + abs(numeric))
            if err > worst:
                worst = err
    return worst
