import numpy as np
import pytest

from conftest import separable_windows
from relapse_bench.evaluation import ConfusionCounts, f2_score
from relapse_bench.models.rpnet import (RelapsePredNetConfig, predict_window,
                                        train_relapseprednet)


class Subset:
    def __init__(self, windows):
        self._w = windows

    def windows(self):
        return self._w

    def labels(self):
        return np.array([w.label for w in self._w], dtype=float)


FAST = RelapsePredNetConfig(hidden_dim=4, fc1_dim=6, fc2_dim=4, learning_rate=5e-3,
                            batch_size=16, max_epochs=5, patience=5)


@pytest.fixture(scope="module")
def tiny_windows():
    return separable_windows(n_windows=24, m_days=6, seed=1)


def test_identical_seed_bitwise_identical(tiny_windows):
    subset = Subset(tiny_windows)
    m1 = train_relapseprednet(subset, FAST, seed=3)
    m2 = train_relapseprednet(subset, FAST, seed=3)
    for name, arr in m1.params.trainable().items():
        assert np.array_equal(arr, m2.params.trainable()[name]), name
    assert np.array_equal(m1.predict_batch(tiny_windows),
                          m2.predict_batch(tiny_windows))


def test_different_seeds_differ(tiny_windows):
    subset = Subset(tiny_windows)
    m1 = train_relapseprednet(subset, FAST, seed=3)
    m2 = train_relapseprednet(subset, FAST, seed=4)
    assert not np.array_equal(m1.predict_batch(tiny_windows),
                              m2.predict_batch(tiny_windows))


def test_two_window_subset_trains(tiny_windows):
    pair = [w for w in tiny_windows if w.label == 1][:1] + \
           [w for w in tiny_windows if w.label == 0][:1]
    model = train_relapseprednet(Subset(pair), FAST, seed=0)
    assert 0.0 <= predict_window(model, pair[0]) <= 1.0


def test_single_window_rejected(tiny_windows):
    with pytest.raises(ValueError):
        train_relapseprednet(Subset(tiny_windows[:1]), FAST, seed=0)


def test_separable_fixture_reaches_high_f2():
    windows = separable_windows(n_windows=200, m_days=28, seed=42)
    cfg = RelapsePredNetConfig(hidden_dim=8, fc1_dim=16, fc2_dim=8,
                               learning_rate=3e-3, batch_size=32,
                               max_epochs=200, patience=20)
    model = train_relapseprednet(Subset(windows), cfg, seed=0)
    probs = model.predict_batch(windows)
    counts = ConfusionCounts()
    for w, p in zip(windows, probs):
        counts.add(w.label, int(p > 0.5))
    assert f2_score(counts) >= 0.95
    # positives score higher on average than negatives
    labels = np.array([w.label for w in windows], dtype=bool)
    assert probs[labels].mean() > probs[~labels].mean()


def test_predictions_deterministic_and_bounded(tiny_windows):
    model = train_relapseprednet(Subset(tiny_windows), FAST, seed=1)
    p1 = predict_window(model, tiny_windows[0])
    p2 = predict_window(model, tiny_windows[0])
    assert p1 == p2
    assert np.all((model.predict_batch(tiny_windows) >= 0)
                  & (model.predict_batch(tiny_windows) <= 1))


def test_unimodal_input_dim_24(tiny_windows):
    cfg = RelapsePredNetConfig(hidden_dim=3, fc1_dim=4, fc2_dim=3,
                               learning_rate=1e-3, batch_size=8, max_epochs=2,
                               patience=2, modalities=("conversation",))
    assert cfg.input_dim == 24
    model = train_relapseprednet(Subset(tiny_windows), cfg, seed=0)
    assert model.params.input_dim == 24
    assert 0.0 <= predict_window(model, tiny_windows[0]) <= 1.0


def test_dimension_mismatch_rejected(tiny_windows):
    model = train_relapseprednet(Subset(tiny_windows), FAST, seed=0)
    with pytest.raises(ValueError):
        model.predict_batch([np.zeros((6, 10))])


def test_embed_batch_width_matches_config(tiny_windows):
    model = train_relapseprednet(Subset(tiny_windows), FAST, seed=0)
    emb = model.embed_batch(tiny_windows[:5])
    assert emb.shape == (5, FAST.fc2_dim)
