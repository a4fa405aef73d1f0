import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from relapse_bench.data import DAY_DIM, ObservationWindow, modality_columns


def make_window(patient_id, label, features, start_day=0, base=date(2023, 1, 2)):
    """ObservationWindow straight from a feature matrix (M, 144)."""
    features = np.asarray(features, dtype=np.float64)
    m = features.shape[0]
    start = base + timedelta(days=start_day)
    return ObservationWindow(
        patient_id=patient_id, window_start=start, features=features,
        observed=np.ones_like(features, dtype=bool),
        target_week_start=start + timedelta(days=m), label=int(label))


def separable_windows(n_windows=200, m_days=28, drift=3.0, noise=0.5, seed=0):
    """Balanced window set where positives carry a conversation-hour drift.

    Negatives: baseline + noise.  Positives: conversation columns shifted
    down by `drift` noise units during day hours.
    """
    rng = np.random.default_rng(seed)
    conv_cols = modality_columns(["conversation"])
    day_hours = conv_cols[8:22]  # hours 8..21
    base = np.zeros(DAY_DIM)
    base[conv_cols] = 5.0
    windows = []
    for i in range(n_windows):
        label = i % 2
        feats = base + rng.normal(0, noise, size=(m_days, DAY_DIM))
        if label:
            feats[:, day_hours] -= drift * noise
        windows.append(make_window(f"P{i:03d}", label, feats, start_day=7 * i))
    return windows


@pytest.fixture(scope="session")
def small_synth_dir(tmp_path_factory):
    """A small written synthetic cohort shared by CLI/data tests."""
    from relapse_bench.synth import CohortSpec, generate_cohort
    out = tmp_path_factory.mktemp("synth-small")
    spec = CohortSpec(n_patients=8, days_per_patient=84, relapse_fraction=0.5,
                      trait_effect=1.5, drift_effect=2.0, missing_rate=0.05, seed=11)
    generate_cohort(spec).write(out)
    return out


@pytest.fixture(scope="session")
def small_cohort(small_synth_dir):
    from relapse_bench.data import ingest_cohort
    return ingest_cohort(small_synth_dir / "patients.csv",
                         small_synth_dir / "sensing.csv",
                         small_synth_dir / "relapses.csv")
