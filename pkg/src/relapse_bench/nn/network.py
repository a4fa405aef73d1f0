"""The relapse prediction network graph and its analytic gradients.

Forward: bilstm -> dropout -> batchnorm -> fc1(relu) -> batchnorm ->
fc2(relu) -> 1-unit sigmoid head.  The backward pass is exact reverse-mode
differentiation, including backpropagation through time over every LSTM step
in both directions.
"""

import copy
from dataclasses import dataclass

import numpy as np

from .layers import (BatchNormParams, LstmCellParams, ShapeError, batchnorm_backward,
                     batchnorm_forward, batchnorm_forward_cached, bilstm_forward_batch,
                     dense_backward, dense_forward, dropout_mask, glorot_uniform,
                     init_lstm_params, lstm_backward_batch, GATE_ORDER, sigmoid)
from .losses import PROB_CLAMP, bce_loss, soft_f2_loss

LOSSES = ("bce", "soft_f2")


@dataclass
class NetworkParams:
    forward_lstm: LstmCellParams
    backward_lstm: LstmCellParams
    bn1: BatchNormParams
    bn2: BatchNormParams
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray
    head_w: np.ndarray
    head_b: np.ndarray
    dropout_rate: float = 0.2

    @property
    def input_dim(self) -> int:
        return self.forward_lstm.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.forward_lstm.hidden_dim

    def trainable(self) -> dict:
        """Flat name -> array view of every trainable parameter."""
        out = {}
        for prefix, cell in (("fwd", self.forward_lstm), ("bwd", self.backward_lstm)):
            for g in GATE_ORDER:
                out[f"{prefix}.w_{g}"] = cell.gate_w(g)
                out[f"{prefix}.u_{g}"] = cell.gate_u(g)
                out[f"{prefix}.b_{g}"] = cell.gate_b(g)
        out["bn1.gamma"] = self.bn1.gamma
        out["bn1.beta"] = self.bn1.beta
        out["bn2.gamma"] = self.bn2.gamma
        out["bn2.beta"] = self.bn2.beta
        out["fc1.w"] = self.fc1_w
        out["fc1.b"] = self.fc1_b
        out["fc2.w"] = self.fc2_w
        out["fc2.b"] = self.fc2_b
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out

    def set_trainable(self, values: dict) -> None:
        for name, arr in self.trainable().items():
            arr[...] = values[name]

    def clone(self) -> "NetworkParams":
        return copy.deepcopy(self)


def init_network_params(input_dim: int = 144, hidden_dim: int = 128,
                        fc1_dim: int = 128, fc2_dim: int = 64,
                        dropout_rate: float = 0.2, seed: int = 0) -> NetworkParams:
    rng = np.random.default_rng(seed)
    fwd = init_lstm_params(input_dim, hidden_dim, rng)
    bwd = init_lstm_params(input_dim, hidden_dim, rng)
    summary = 2 * hidden_dim
    return NetworkParams(
        forward_lstm=fwd, backward_lstm=bwd,
        bn1=BatchNormParams.create(summary), bn2=BatchNormParams.create(fc1_dim),
        fc1_w=glorot_uniform(rng, summary, fc1_dim, (fc1_dim, summary)),
        fc1_b=np.zeros(fc1_dim),
        fc2_w=glorot_uniform(rng, fc1_dim, fc2_dim, (fc2_dim, fc1_dim)),
        fc2_b=np.zeros(fc2_dim),
        head_w=glorot_uniform(rng, fc2_dim, 1, (1, fc2_dim)),
        head_b=np.zeros(1),
        dropout_rate=dropout_rate)


def _require_finite(arr, layer: str):
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values produced by layer {layer!r}")


def network_forward(batch: np.ndarray, params: NetworkParams, mode: str = "eval",
                    dropout_seed: int = 0, return_cache: bool = False):
    """Forward pass over a (B, M, D) batch.

    Returns (p, fc2_act, cache, bn_stats): probabilities (B,), the 64-dim
    hidden activations, the backward cache (train mode with return_cache) and
    the refreshed batch-norm running stats (train mode).
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[2] != params.input_dim:
        raise ShapeError(f"batch shape {batch.shape} incompatible with input_dim "
                         f"{params.input_dim}")
    summary, lstm_caches = bilstm_forward_batch(batch, params.forward_lstm,
                                                params.backward_lstm)
    _require_finite(summary, "bilstm")
    if mode == "train":
        mask = dropout_mask(summary.shape, params.dropout_rate, dropout_seed) \
            if params.dropout_rate > 0 else np.ones_like(summary)
        dropped = summary * mask
        n1, bn1_cache, bn1_stats = batchnorm_forward_cached(dropped, params.bn1)
        _require_finite(n1, "batchnorm1")
        a1 = dense_forward(n1, params.fc1_w, params.fc1_b, "relu")
        _require_finite(a1, "fc1")
        n2, bn2_cache, bn2_stats = batchnorm_forward_cached(a1, params.bn2)
        _require_finite(n2, "batchnorm2")
        a2 = dense_forward(n2, params.fc2_w, params.fc2_b, "relu")
        _require_finite(a2, "fc2")
        p = dense_forward(a2, params.head_w, params.head_b, "sigmoid").ravel()
        _require_finite(p, "head")
        cache = None
        if return_cache:
            cache = (batch, lstm_caches, summary, mask, dropped, n1, bn1_cache,
                     a1, n2, bn2_cache, a2, p)
        return p, a2, cache, (bn1_stats, bn2_stats)
    dropped = summary  # eval-mode dropout is the identity
    n1, _ = batchnorm_forward(dropped, params.bn1, "eval")
    a1 = dense_forward(n1, params.fc1_w, params.fc1_b, "relu")
    n2, _ = batchnorm_forward(a1, params.bn2, "eval")
    a2 = dense_forward(n2, params.fc2_w, params.fc2_b, "relu")
    p = dense_forward(a2, params.head_w, params.head_b, "sigmoid").ravel()
    _require_finite(p, "head")
    return p, a2, None, None


def network_loss(batch, labels, params, loss: str = "bce", mode: str = "train",
                 dropout_seed: int = 0):
    """Loss value only (used by the finite-difference checker)."""
    p, _, _, _ = network_forward(batch, params, mode, dropout_seed)
    fn = bce_loss if loss == "bce" else soft_f2_loss
    value, _ = fn(p, labels)
    return value


def network_backward(batch, labels, params: NetworkParams, loss: str = "bce",
                     mode: str = "train", dropout_seed: int = 0):
    """Analytic gradients of the mean loss w.r.t. every trainable parameter.

    Returns (loss value, gradient bundle, refreshed bn running stats).  The
    gradient bundle keys mirror NetworkParams.trainable().
    """
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    labels = np.asarray(labels, dtype=np.float64).ravel()
    p, _, cache, bn_stats = network_forward(batch, params, mode, dropout_seed,
                                            return_cache=True)
    (batch, lstm_caches, summary, mask, dropped, n1, bn1_cache,
     a1, n2, bn2_cache, a2, p) = cache
    if labels.shape != p.shape:
        raise ShapeError(f"label count {labels.shape[0]} != batch size {p.shape[0]}")

    if loss == "bce":
        value, _ = bce_loss(p, labels)
        # exact dloss/dz for sigmoid + clamped BCE; flat where the clamp binds
        dz = (np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP) - labels) / p.size
        dz[(p < PROB_CLAMP) | (p > 1 - PROB_CLAMP)] = 0.0
    else:
        value, dp = soft_f2_loss(p, labels)
        dz = dp * p * (1.0 - p)
    _require_finite(np.array([value]), "loss")

    grads = {}
    dz = dz[:, None]
    grads["head.w"] = dz.T @ a2
    grads["head.b"] = dz.sum(axis=0)
    da2 = dz @ params.head_w
    dW2, db2, dn2 = dense_backward(da2, n2, params.fc2_w, "relu", a2)
    grads["fc2.w"], grads["fc2.b"] = dW2, db2
    dg2, dbeta2, da1 = batchnorm_backward(dn2, bn2_cache, params.bn2)
    grads["bn2.gamma"], grads["bn2.beta"] = dg2, dbeta2
    dW1, db1, dn1 = dense_backward(da1, n1, params.fc1_w, "relu", a1)
    grads["fc1.w"], grads["fc1.b"] = dW1, db1
    dg1, dbeta1, ddropped = batchnorm_backward(dn1, bn1_cache, params.bn1)
    grads["bn1.gamma"], grads["bn1.beta"] = dg1, dbeta1
    dsummary = ddropped * mask
    _require_finite(dsummary, "dropout-backward")

    H = params.hidden_dim
    cache_f, cache_b = lstm_caches
    for prefix, dh, c, cell in (("fwd", dsummary[:, :H], cache_f, params.forward_lstm),
                                ("bwd", dsummary[:, H:], cache_b, params.backward_lstm)):
        cell_grads = lstm_backward_batch(dh, c, cell)
        for k, v in cell_grads.items():
            grads[f"{prefix}.{k}"] = v
    return value, grads, bn_stats


def apply_bn_stats(params: NetworkParams, bn_stats) -> None:
    """Install running statistics returned by a train-mode forward pass."""
    (m1, v1), (m2, v2) = bn_stats
    params.bn1.running_mean, params.bn1.running_var = m1, v1
    params.bn2.running_mean, params.bn2.running_var = m2, v2
