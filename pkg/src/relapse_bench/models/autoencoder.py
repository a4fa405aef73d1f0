"""Encoder-decoder day-vector model with Mahalanobis anomaly scoring.

The autoencoder reconstructs normalized daily feature vectors; the anomaly
detector fits a Gaussian to embeddings of non-relapse days, scores a window
by aggregating day-level Mahalanobis distances, and thresholds the score by
an exhaustive training-F2 sweep.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..data import DAY_DIM, Normalizer, apply_normalizer, modality_columns
from ..nn.adam import adam_init, adam_update
from ..nn.layers import glorot_uniform, sigmoid
from ..util import derive_rng, derive_seed
from .fusion import _require_prob


@dataclass(frozen=True)
class AutoencoderConfig:
    layer_sizes: tuple = (144, 64, 16)   # encoder; decoder mirrors it
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    modalities: tuple | None = None

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and embedding sizes")
        if self.layer_sizes[-1] >= self.layer_sizes[0]:
            raise ValueError("embedding dim must be smaller than input dim")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def embedding_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class Autoencoder:
    config: AutoencoderConfig
    weights: list
    biases: list
    seed: int = 0

    def _forward(self, x):
        acts = [x]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w.T + b
            acts.append(z if i == n_layers - 1 else np.maximum(z, 0.0))
        return acts

    def encode(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        n_enc = len(self.config.layer_sizes) - 1
        act = rows
        for i in range(n_enc):
            act = np.maximum(act @ self.weights[i].T + self.biases[i], 0.0)
        return act

    def reconstruct(self, rows: np.ndarray) -> np.ndarray:
        return self._forward(np.atleast_2d(np.asarray(rows, dtype=np.float64)))[-1]

    def mse(self, rows: np.ndarray) -> float:
        rows = np.atleast_2d(rows)
        return float(((self.reconstruct(rows) - rows) ** 2).mean())


def _init_autoencoder(config: AutoencoderConfig, seed: int) -> Autoencoder:
    sizes = list(config.layer_sizes) + list(config.layer_sizes[-2::-1])
    rng = np.random.default_rng(derive_seed(seed, "autoenc-init"))
    weights, biases = [], []
    for d_in, d_out in zip(sizes[:-1], sizes[1:]):
        weights.append(glorot_uniform(rng, d_in, d_out, (d_out, d_in)))
        biases.append(np.zeros(d_out))
    return Autoencoder(config, weights, biases, seed)


def train_autoencoder(day_rows: np.ndarray, config: AutoencoderConfig = AutoencoderConfig(),
                      seed: int = 0) -> Autoencoder:
    """Mini-batch ADAM on mean-squared reconstruction error; deterministic
    per seed.  `day_rows` are normalized day vectors, shape (n, input_dim)."""
    x = np.atleast_2d(np.asarray(day_rows, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("no day vectors to train on")
    if x.shape[1] != config.input_dim:
        raise ValueError(f"day rows have dim {x.shape[1]}, config expects "
                         f"{config.input_dim}")
    model = _init_autoencoder(config, seed)
    names = [f"w{i}" for i in range(len(model.weights))] + \
            [f"b{i}" for i in range(len(model.biases))]
    def params_dict():
        return {**{f"w{i}": w for i, w in enumerate(model.weights)},
                **{f"b{i}": b for i, b in enumerate(model.biases)}}
    state = adam_init({k: v.shape for k, v in params_dict().items()},
                      alpha=config.learning_rate)
    n = x.shape[0]
    n_layers = len(model.weights)
    for epoch in range(config.epochs):
        rng = derive_rng(seed, "autoenc-shuffle", epoch)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = x[idx]
            acts = model._forward(batch)
            recon = acts[-1]
            grads = {}
            delta = 2.0 * (recon - batch) / recon.size
            for i in range(n_layers - 1, -1, -1):
                if i != n_layers - 1:
                    delta = delta * (acts[i + 1] > 0)
                grads[f"w{i}"] = delta.T @ acts[i]
                grads[f"b{i}"] = delta.sum(axis=0)
                delta = delta @ model.weights[i]
            new_values, state = adam_update(params_dict(), grads, state)
            for i in range(n_layers):
                model.weights[i] = new_values[f"w{i}"]
                model.biases[i] = new_values[f"b{i}"]
    return model


# ---------------------------------------------------------------------------
# Mahalanobis anomaly detection
# ---------------------------------------------------------------------------

def mahalanobis_distance(x: np.ndarray, mean: np.ndarray, cov_inverse: np.ndarray) -> float:
    """sqrt((x - mean)^T  Sigma^-1 (x - mean))."""
    x = np.asarray(x, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    if x.shape != mean.shape or cov_inverse.shape != (x.size, x.size):
        raise ValueError("shape mismatch between x, mean and covariance inverse")
    d = x - mean
    return float(np.sqrt(max(d @ cov_inverse @ d, 0.0)))


@dataclass
class AnomalyDetector:
    """Gaussian embedding model plus a learned window-score threshold.

    Carries the encoder and normalizer so whole observation windows can be
    scored directly.
    """
    mean: np.ndarray
    cov_inverse: np.ndarray
    threshold: float
    scale: float
    aggregate: str = "mean"
    encoder: Autoencoder | None = None
    normalizer: Normalizer | None = None
    modalities: tuple | None = None
    training_scores: np.ndarray | None = None

    def window_rows(self, window) -> np.ndarray:
        feats = window.features if hasattr(window, "features") else np.asarray(window)
        rows = np.asarray(feats, dtype=np.float64)
        if self.modalities:
            rows = rows[:, modality_columns(self.modalities)]
        return apply_normalizer(self.normalizer, rows)

    def score_window(self, window) -> float:
        emb = self.encoder.encode(self.window_rows(window))
        dists = np.array([mahalanobis_distance(e, self.mean, self.cov_inverse)
                          for e in emb])
        return float(dists.max() if self.aggregate == "max" else dists.mean())


def _threshold_sweep(scores: np.ndarray, labels: np.ndarray):
    """Best F2 threshold over midpoints of sorted unique scores; ties take
    the smallest threshold.  Returns (threshold, best F2)."""
    uniq = np.unique(scores)
    if uniq.size < 2:
        warnings.warn("all window scores identical; thresholding above max "
                      "(every window predicted negative)")
        return float(uniq[0] + 1.0) if uniq.size else 1.0, 0.0
    candidates = (uniq[:-1] + uniq[1:]) / 2.0
    best_thr, best_f2 = candidates[0], -1.0
    pos = labels == 1
    for thr in candidates:
        pred = scores > thr
        tp = int(np.sum(pred & pos))
        fp = int(np.sum(pred & ~pos))
        fn = int(np.sum(~pred & pos))
        f2 = 0.0 if tp == 0 else 5.0 * tp / (5.0 * tp + 4.0 * fn + fp)
        if f2 > best_f2:
            best_thr, best_f2 = thr, f2
    return float(best_thr), float(best_f2)


def fit_anomaly_detector(encoder: Autoencoder, training_windows, normalizer: Normalizer,
                         aggregate: str = "mean", modalities: tuple | None = None,
                         ridge_factor: float = 1e-3) -> AnomalyDetector:
    """Gaussian fit (ridge-regularized covariance) on embeddings of
    non-relapse days; window scores are aggregated day distances; the
    threshold maximizes training F2 over an exhaustive midpoint sweep."""
    training_windows = list(training_windows)
    if not training_windows:
        raise ValueError("no training windows")
    det = AnomalyDetector(mean=None, cov_inverse=None, threshold=0.0, scale=1.0,
                          aggregate=aggregate, encoder=encoder, normalizer=normalizer,
                          modalities=modalities)
    healthy_rows = np.concatenate([det.window_rows(w) for w in training_windows
                                   if w.label == 0])
    emb = encoder.encode(healthy_rows)
    mean = emb.mean(axis=0)
    centered = emb - mean
    cov = centered.T @ centered / max(emb.shape[0] - 1, 1)
    dim = cov.shape[0]
    lam = ridge_factor * np.trace(cov) / dim
    if lam <= 0:
        lam = ridge_factor
    cov_reg = cov + lam * np.eye(dim)
    cov_inv = np.linalg.inv(cov_reg)
    cov_inv = (cov_inv + cov_inv.T) / 2.0
    if np.any(np.linalg.eigvalsh(cov_inv) <= 0):
        raise ValueError("covariance inverse is not positive definite")
    det.mean, det.cov_inverse = mean, cov_inv

    scores = np.array([det.score_window(w) for w in training_windows])
    labels = np.array([w.label for w in training_windows])
    det.threshold, _ = _threshold_sweep(scores, labels)
    q75, q25 = np.percentile(scores, [75, 25])
    det.scale = float(q75 - q25) or 1.0
    det.training_scores = scores
    return det


def anomaly_predict_window(detector: AnomalyDetector, window):
    """(probability-like score in [0, 1], binary decision).  Binary is the
    strict score > threshold rule; the logistic value only exists so fusion
    can treat all model families alike."""
    score = detector.score_window(window)
    prob = float(sigmoid(np.array([(score - detector.threshold) / detector.scale]))[0])
    return _require_prob(prob), bool(score > detector.threshold)
