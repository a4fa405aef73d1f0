"""From-scratch differentiable layers on float64 numpy arrays.

Single-sample functions (`lstm_cell_step`, `bilstm_forward`, `dense_forward`)
are the reference semantics; the `*_batch` variants used by the training loop
vectorize over a leading batch axis and produce identical numbers.
"""

from dataclasses import dataclass, field

import numpy as np

GATE_ORDER = ("i", "f", "g", "o")  # input, forget, candidate, output


class ShapeError(ValueError):
    pass


def sigmoid(x):
    # stable logistic: never exponentiates a positive argument
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

@dataclass
class LstmCellParams:
    """One directional LSTM half: per-gate input weights (hidden, input),
    recurrent weights (hidden, hidden) and biases (hidden,)."""

    input_dim: int
    hidden_dim: int
    w_i: np.ndarray
    w_f: np.ndarray
    w_g: np.ndarray
    w_o: np.ndarray
    u_i: np.ndarray
    u_f: np.ndarray
    u_g: np.ndarray
    u_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray

    def gate_w(self, g: str) -> np.ndarray:
        return getattr(self, "w_" + g)

    def gate_u(self, g: str) -> np.ndarray:
        return getattr(self, "u_" + g)

    def gate_b(self, g: str) -> np.ndarray:
        return getattr(self, "b_" + g)

    def fused(self):
        """(4H, D), (4H, H), (4H,) with gates stacked in GATE_ORDER."""
        w = np.vstack([self.gate_w(g) for g in GATE_ORDER])
        u = np.vstack([self.gate_u(g) for g in GATE_ORDER])
        b = np.concatenate([self.gate_b(g) for g in GATE_ORDER])
        return w, u, b


def init_lstm_params(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmCellParams:
    """Glorot-uniform weights, zero biases except forget-gate bias = 1."""
    kw = {}
    for g in GATE_ORDER:
        kw["w_" + g] = glorot_uniform(rng, input_dim, hidden_dim, (hidden_dim, input_dim))
    for g in GATE_ORDER:
        kw["u_" + g] = glorot_uniform(rng, hidden_dim, hidden_dim, (hidden_dim, hidden_dim))
    for g in GATE_ORDER:
        kw["b_" + g] = np.zeros(hidden_dim)
    kw["b_f"] = np.ones(hidden_dim)
    return LstmCellParams(input_dim=input_dim, hidden_dim=hidden_dim, **kw)


def lstm_cell_step(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                   params: LstmCellParams):
    """One LSTM recurrence step; returns (h, c)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    if x_t.shape != (params.input_dim,):
        raise ShapeError(f"x_t has shape {x_t.shape}, expected ({params.input_dim},)")
    if h_prev.shape != (params.hidden_dim,) or c_prev.shape != (params.hidden_dim,):
        raise ShapeError("h_prev/c_prev dimension mismatch with params.hidden_dim")
    i = sigmoid(params.w_i @ x_t + params.u_i @ h_prev + params.b_i)
    f = sigmoid(params.w_f @ x_t + params.u_f @ h_prev + params.b_f)
    g = np.tanh(params.w_g @ x_t + params.u_g @ h_prev + params.b_g)
    o = sigmoid(params.w_o @ x_t + params.u_o @ h_prev + params.b_o)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def lstm_forward_batch(x: np.ndarray, params: LstmCellParams):
    """Run one direction over x of shape (B, M, D).

    Returns (h_final, cache).  The cache stores per-step pre-activations and
    states needed by `lstm_backward_batch`.
    """
    B, M, D = x.shape
    H = params.hidden_dim
    w, u, b = params.fused()
    # input contribution for every step in one matmul: (B, M, 4H)
    xproj = x.reshape(B * M, D) @ w.T
    xproj = xproj.reshape(B, M, 4 * H)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    gates = np.empty((M, B, 4 * H))     # post-activation i,f,g,o
    cells = np.empty((M, B, H))         # c_t
    tanhc = np.empty((M, B, H))
    h_prevs = np.empty((M, B, H))
    for t in range(M):
        a = xproj[:, t, :] + h @ u.T + b
        i = sigmoid(a[:, 0:H])
        f = sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = sigmoid(a[:, 3 * H:4 * H])
        h_prevs[t] = h
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[t] = np.concatenate([i, f, g, o], axis=1)
        cells[t] = c
        tanhc[t] = tc
    cache = (x, gates, cells, tanhc, h_prevs, u)
    return h, cache


def lstm_backward_batch(dh_final: np.ndarray, cache, params: LstmCellParams):
    """BPTT for one direction given the gradient of the final hidden state.

    Returns a dict of per-gate parameter gradients matching LstmCellParams
    field names.
    """
    x, gates, cells, tanhc, h_prevs, u = cache
    B, M, D = x.shape
    H = params.hidden_dim
    da_all = np.zeros((M, B, 4 * H))
    dh = dh_final.copy()
    dc = np.zeros((B, H))
    du = np.zeros((4 * H, H))
    for t in range(M - 1, -1, -1):
        i = gates[t][:, 0:H]
        f = gates[t][:, H:2 * H]
        g = gates[t][:, 2 * H:3 * H]
        o = gates[t][:, 3 * H:4 * H]
        tc = tanhc[t]
        c_prev = cells[t - 1] if t > 0 else np.zeros((B, H))
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        da = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                             dg * (1 - g * g), do * o * (1 - o)], axis=1)
        da_all[t] = da
        du += da.T @ h_prevs[t]
        dh = da @ u
        dc = dc * f
    dw = da_all.reshape(M * B, 4 * H).T @ x.transpose(1, 0, 2).reshape(M * B, D)
    db = da_all.sum(axis=(0, 1))
    grads = {}
    for k, g in enumerate(GATE_ORDER):
        sl = slice(k * H, (k + 1) * H)
        grads["w_" + g] = dw[sl]
        grads["u_" + g] = du[sl]
        grads["b_" + g] = db[sl]
    return grads


def bilstm_forward(sequence, fwd: LstmCellParams, bwd: LstmCellParams) -> np.ndarray:
    """Concatenated final hidden states of the forward pass and of the
    backward pass over the reversed sequence; shape (2*hidden_dim,)."""
    seq = [np.asarray(v, dtype=np.float64) for v in sequence]
    if len(seq) == 0:
        raise ValueError("bilstm_forward: empty sequence")
    h_f = np.zeros(fwd.hidden_dim)
    c_f = np.zeros(fwd.hidden_dim)
    for x_t in seq:
        h_f, c_f = lstm_cell_step(x_t, h_f, c_f, fwd)
    h_b = np.zeros(bwd.hidden_dim)
    c_b = np.zeros(bwd.hidden_dim)
    for x_t in reversed(seq):
        h_b, c_b = lstm_cell_step(x_t, h_b, c_b, bwd)
    return np.concatenate([h_f, h_b])


def bilstm_forward_batch(x: np.ndarray, fwd: LstmCellParams, bwd: LstmCellParams):
    """Batched bilstm over x (B, M, D) -> ((B, 2H), caches)."""
    if x.shape[1] == 0:
        raise ValueError("bilstm_forward_batch: empty sequence")
    h_f, cache_f = lstm_forward_batch(x, fwd)
    h_b, cache_b = lstm_forward_batch(x[:, ::-1, :], bwd)
    return np.concatenate([h_f, h_b], axis=1), (cache_f, cache_b)


# ---------------------------------------------------------------------------
# Dense
# ---------------------------------------------------------------------------

ACTIVATIONS = ("relu", "linear", "sigmoid")


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray,
                  activation: str = "linear") -> np.ndarray:
    """activation(W x + b) for a single vector or a (B, in) batch."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != weights.shape[1]:
        raise ShapeError(f"input dim {x.shape[-1]} != weight cols {weights.shape[1]}")
    z = x @ weights.T + bias
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        return sigmoid(z)
    return z


def dense_backward(dz_or_da, x, weights, activation, out):
    """Gradient of a dense layer.  `dz_or_da` is dL/d(output); `out` is the
    forward output (needed for relu/sigmoid).  Returns (dW, db, dx)."""
    if activation == "relu":
        dz = dz_or_da * (out > 0)
    elif activation == "sigmoid":
        dz = dz_or_da * out * (1.0 - out)
    else:
        dz = dz_or_da
    dW = dz.T @ x
    db = dz.sum(axis=0)
    dx = dz @ weights
    return dW, db, dx


# ---------------------------------------------------------------------------
# Batch normalization
# ---------------------------------------------------------------------------

@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5

    @classmethod
    def create(cls, n_features: int, momentum: float = 0.1, epsilon: float = 1e-5):
        return cls(gamma=np.ones(n_features), beta=np.zeros(n_features),
                   running_mean=np.zeros(n_features), running_var=np.ones(n_features),
                   momentum=momentum, epsilon=epsilon)


def batchnorm_forward(batch: np.ndarray, params: BatchNormParams, mode: str = "train"):
    """Returns (normalized batch, updated params).  Train mode standardizes
    with batch statistics and refreshes the running stats; eval mode uses the
    running stats and leaves params untouched."""
    batch = np.asarray(batch, dtype=np.float64)
    if mode == "train":
        if batch.shape[0] < 2:
            raise ValueError("batchnorm train mode requires batch size >= 2")
        mean = batch.mean(axis=0)
        var = batch.var(axis=0)
        xhat = (batch - mean) / np.sqrt(var + params.epsilon)
        m = params.momentum
        new = BatchNormParams(
            gamma=params.gamma, beta=params.beta,
            running_mean=(1 - m) * params.running_mean + m * mean,
            running_var=(1 - m) * params.running_var + m * var,
            momentum=params.momentum, epsilon=params.epsilon)
        return params.gamma * xhat + params.beta, new
    if mode == "eval":
        xhat = (batch - params.running_mean) / np.sqrt(params.running_var + params.epsilon)
        return params.gamma * xhat + params.beta, params
    raise ValueError(f"unknown batchnorm mode {mode!r}")


def batchnorm_forward_cached(batch: np.ndarray, params: BatchNormParams):
    """Train-mode forward that also returns the cache for the backward pass."""
    if batch.shape[0] < 2:
        raise ValueError("batchnorm train mode requires batch size >= 2")
    mean = batch.mean(axis=0)
    var = batch.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + params.epsilon)
    xhat = (batch - mean) * inv_std
    out = params.gamma * xhat + params.beta
    new_stats = ((1 - params.momentum) * params.running_mean + params.momentum * mean,
                 (1 - params.momentum) * params.running_var + params.momentum * var)
    return out, (xhat, inv_std), new_stats


def batchnorm_backward(dout: np.ndarray, cache, params: BatchNormParams):
    """Returns (dgamma, dbeta, dx) for a train-mode forward."""
    xhat, inv_std = cache
    N = dout.shape[0]
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * params.gamma
    dx = (inv_std / N) * (N * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dgamma, dbeta, dx


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------

def dropout_mask(shape, rate: float, rng_seed: int) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability `rate`, else 1/(1-rate)."""
    rng = np.random.default_rng(rng_seed)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout_apply(x: np.ndarray, rate: float, mode: str = "train",
                  rng_seed: int = 0) -> np.ndarray:
    """Inverted dropout; eval mode and rate 0 are exact identities."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    x = np.asarray(x, dtype=np.float64)
    if mode == "eval" or rate == 0.0:
        return x.copy()
    if mode != "train":
        raise ValueError(f"unknown dropout mode {mode!r}")
    return x * dropout_mask(x.shape, rate, rng_seed)
