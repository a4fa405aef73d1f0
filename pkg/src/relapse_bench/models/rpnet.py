"""Supervised bi-LSTM relapse predictor: training loop and prediction."""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..data import DAY_DIM, Normalizer, apply_normalizer, fit_normalizer, modality_columns
from ..nn.adam import adam_init, adam_update
from ..nn.network import (NetworkParams, apply_bn_stats, init_network_params,
                          network_backward, network_forward)
from ..nn.params_io import load_tensors, save_tensors
from ..util import derive_rng, derive_seed


@dataclass(frozen=True)
class RelapsePredNetConfig:
    hidden_dim: int = 128
    fc1_dim: int = 128
    fc2_dim: int = 64
    dropout_rate: float = 0.2
    loss: str = "bce"
    learning_rate: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    min_improvement: float = 1e-5
    modalities: tuple | None = None   # None = all six (input dim 144)
    threshold: float = 0.5

    def __post_init__(self):
        if self.hidden_dim <= 0 or self.fc1_dim <= 0 or self.fc2_dim <= 0:
            raise ValueError("layer sizes must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.loss not in ("bce", "soft_f2"):
            raise ValueError(f"unknown loss {self.loss!r}")

    @property
    def input_dim(self) -> int:
        return 24 * len(self.modalities) if self.modalities else DAY_DIM


@dataclass
class RelapsePredNet:
    """Trained parameters plus the normalizer they were fitted with."""
    params: NetworkParams
    normalizer: Normalizer
    config: RelapsePredNetConfig
    seed: int

    def _prepare(self, windows) -> np.ndarray:
        feats = [w.features if hasattr(w, "features") else np.asarray(w) for w in windows]
        x = np.stack([np.asarray(f, dtype=np.float64) for f in feats])
        if self.config.modalities:
            x = x[:, :, modality_columns(self.config.modalities)]
        if x.shape[2] != self.params.input_dim:
            raise ValueError(f"window dim {x.shape[2]} != model input dim "
                             f"{self.params.input_dim}")
        return apply_normalizer(self.normalizer, x)

    def predict_batch(self, windows) -> np.ndarray:
        if not len(windows):
            return np.zeros(0)
        p, _, _, _ = network_forward(self._prepare(windows), self.params, "eval")
        return p

    def embed_batch(self, windows) -> np.ndarray:
        """Final-hidden-layer (fc2) activations in eval mode."""
        _, emb, _, _ = network_forward(self._prepare(windows), self.params, "eval")
        return emb

    def normalizer_digest(self) -> str:
        return hashlib.sha256(self.normalizer.digest_source().encode()).hexdigest()[:16]


def _subset_tensor(subset_windows, modalities):
    x = np.stack([np.asarray(w.features, dtype=np.float64) for w in subset_windows])
    if modalities:
        x = x[:, :, modality_columns(modalities)]
    return x


def _batches(n: int, batch_size: int, rng) -> list:
    """Shuffled batch index lists; a trailing singleton is folded into the
    previous batch so train-mode batch norm always sees >= 2 samples."""
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def train_relapseprednet(subset, config: RelapsePredNetConfig = RelapsePredNetConfig(),
                         seed: int = 0, normalizer: Normalizer | None = None) -> RelapsePredNet:
    """Mini-batch ADAM training on a balanced subset, shuffled per epoch,
    stopping early once the epoch loss has improved by less than
    `min_improvement` for `patience` consecutive epochs.  Deterministic for a
    fixed (subset, config, seed)."""
    windows = subset.windows() if hasattr(subset, "windows") else list(subset)
    labels = subset.labels() if hasattr(subset, "labels") else \
        np.array([w.label for w in windows], dtype=np.float64)
    if len(windows) < 2:
        raise ValueError("training needs at least 2 windows")
    x = _subset_tensor(windows, config.modalities)
    if normalizer is None:
        normalizer = fit_normalizer(x.reshape(-1, x.shape[2]), "training-subset")
    x = apply_normalizer(normalizer, x)

    params = init_network_params(config.input_dim, config.hidden_dim, config.fc1_dim,
                                 config.fc2_dim, config.dropout_rate,
                                 derive_seed(seed, "init"))
    state = adam_init({k: v.shape for k, v in params.trainable().items()},
                      alpha=config.learning_rate)
    best = np.inf
    stall = 0
    n = len(windows)
    for epoch in range(config.max_epochs):
        rng = derive_rng(seed, "shuffle", epoch)
        total = 0.0
        for b, idx in enumerate(_batches(n, config.batch_size, rng)):
            loss, grads, bn_stats = network_backward(
                x[idx], labels[idx], params, config.loss, "train",
                dropout_seed=derive_seed(seed, "dropout", epoch, b))
            new_values, state = adam_update(params.trainable(), grads, state)
            params.set_trainable(new_values)
            apply_bn_stats(params, bn_stats)
            total += loss * len(idx)
        epoch_loss = total / n
        if best - epoch_loss < config.min_improvement:
            stall += 1
            if stall >= config.patience:
                break
        else:
            stall = 0
        best = min(best, epoch_loss)
    return RelapsePredNet(params, normalizer, config, seed)


def predict_window(model: RelapsePredNet, window) -> float:
    """Relapse probability in [0, 1] for one observation window (eval-mode
    batch norm and dropout; deterministic)."""
    return float(model.predict_batch([window])[0])


# ---------------------------------------------------------------------------
# Persistence (RPNET-PARAMS v1)
# ---------------------------------------------------------------------------

def save_relapseprednet(model: RelapsePredNet, path) -> None:
    tensors = dict(model.params.trainable())
    for name, bn in (("bn1", model.params.bn1), ("bn2", model.params.bn2)):
        tensors[f"{name}.running_mean"] = bn.running_mean
        tensors[f"{name}.running_var"] = bn.running_var
    tensors["norm.min"] = model.normalizer.minimum
    tensors["norm.max"] = model.normalizer.maximum
    cfg = {k: (list(v) if isinstance(v, tuple) else v)
           for k, v in vars(model.config).items()}
    save_tensors(path, tensors, metadata={
        "family": "rpnet",
        "config": json.dumps(cfg, sort_keys=True),
        "seed": model.seed,
        "normalizer": model.normalizer_digest(),
    })


def load_relapseprednet(path) -> RelapsePredNet:
    tensors, meta = load_tensors(path)
    if meta.get("family") != "rpnet":
        raise ValueError(f"not an rpnet parameter file: {path}")
    cfg_dict = json.loads(meta["config"])
    if cfg_dict.get("modalities"):
        cfg_dict["modalities"] = tuple(cfg_dict["modalities"])
    config = RelapsePredNetConfig(**cfg_dict)
    params = init_network_params(config.input_dim, config.hidden_dim, config.fc1_dim,
                                 config.fc2_dim, config.dropout_rate, 0)
    values = {name: tensors[name].reshape(arr.shape)
              for name, arr in params.trainable().items()}
    params.set_trainable(values)
    for name, bn in (("bn1", params.bn1), ("bn2", params.bn2)):
        bn.running_mean = tensors[f"{name}.running_mean"].ravel()
        bn.running_var = tensors[f"{name}.running_var"].ravel()
    norm = Normalizer(tensors["norm.min"].ravel(), tensors["norm.max"].ravel(),
                      "loaded")
    return RelapsePredNet(params, norm, config, int(meta.get("seed", 0)))
