"""Binary cross entropy and a differentiable F2 surrogate.

Both return (scalar loss, dloss/dp) so the network backward pass can chain
through the sigmoid head analytically.
"""

import numpy as np

PROB_CLAMP = 1e-7


def _check(p, y):
    p = np.asarray(p, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: p has {p.shape[0]}, y has {y.shape[0]}")
    return p, y


def bce_loss(p, y):
    """Mean binary cross entropy.  Probabilities are clamped to
    [1e-7, 1-1e-7] before the log; the returned gradient is zero wherever the
    clamp binds (the clamped loss is flat there)."""
    p, y = _check(p, y)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    n = p.size
    loss = float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).mean())
    grad = (pc - y) / (pc * (1.0 - pc)) / n
    grad[p != pc] = 0.0
    return loss, grad


def soft_f2_loss(p, y):
    """1 - soft F2 computed from soft counts TP = sum(p*y),
    FP = sum(p*(1-y)), FN = sum((1-p)*y).

    With no positive label the loss is the constant 1 (zero gradient).
    """
    p, y = _check(p, y)
    if y.sum() == 0:
        return 1.0, np.zeros_like(p)
    tp = float(p @ y)
    fp = float(p @ (1.0 - y))
    fn = float((1.0 - p) @ y)
    denom = 5.0 * tp + 4.0 * fn + fp
    loss = 1.0 - 5.0 * tp / denom
    # d(5TP)/dp_i = 5 y_i, d(denom)/dp_i = 1  =>  dloss/dp_i
    grad = -(5.0 * y * denom - 5.0 * tp) / (denom * denom)
    return float(loss), grad
