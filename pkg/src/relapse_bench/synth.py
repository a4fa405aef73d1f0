"""Seeded generator of CrossCheck-like synthetic cohorts.

Each patient gets a circadian behavior profile; a sociability trait (the
SFS-like score) shifts the conversation and volume baselines, and patients
assigned a relapse drift their conversation/volume/distance signal downward
during the prodromal days before the event.  Output is byte-identical for a
fixed spec.
"""

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .data import MODALITIES

START_DATE = date(2023, 1, 2)

# circadian baselines, one level per hour 0..23
_BASE = {
    "light": [5, 5, 5, 5, 5, 20, 80, 150, 250, 350, 400, 420,
              430, 420, 400, 350, 300, 250, 200, 150, 100, 50, 20, 10],
    "volume": [2, 2, 2, 2, 2, 4, 10, 25, 40, 50, 55, 60,
               60, 55, 50, 50, 55, 60, 55, 45, 30, 15, 8, 4],
    "conversation": [0, 0, 0, 0, 0, 0, 30, 120, 300, 450, 550, 600,
                     620, 600, 550, 500, 480, 500, 450, 350, 250, 120, 40, 5],
    "distance": [0, 0, 0, 0, 0, 10, 80, 600, 1200, 500, 350, 300,
                 350, 300, 280, 300, 500, 1100, 900, 400, 200, 80, 20, 5],
    "acc": [0.02, 0.02, 0.02, 0.02, 0.02, 0.04, 0.10, 0.25, 0.35, 0.30, 0.28, 0.27,
            0.30, 0.28, 0.26, 0.27, 0.32, 0.38, 0.33, 0.25, 0.18, 0.10, 0.05, 0.03],
    "screen": [60, 40, 30, 20, 20, 40, 120, 250, 300, 280, 260, 280,
               320, 300, 280, 270, 300, 350, 420, 500, 520, 450, 280, 120],
}
_NOISE_STD = {"light": 80.0, "volume": 12.0, "conversation": 150.0,
              "distance": 250.0, "acc": 0.08, "screen": 90.0}
TRAIT_MODALITIES = ("conversation", "volume")
DRIFT_MODALITIES = ("conversation", "volume", "distance")
_SCORE_TRAIT_LOADING = -0.4  # symptom scores and age move against the trait

# per-patient baseline spread in noise-std units: individual habits differ,
# most strongly in mobility; the sociability trait explains conv/volume only
_BASELINE_JITTER = {"light": 1.0, "volume": 0.5, "conversation": 0.5,
                    "distance": 2.0, "acc": 1.0, "screen": 1.0}


@dataclass(frozen=True)
class CohortSpec:
    n_patients: int = 40
    days_per_patient: int = 182
    relapse_fraction: float = 0.3
    prodrome_days: int = 30
    trait_effect: float = 1.5
    drift_effect: float = 1.5
    missing_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_patients <= 0:
            raise ValueError("n_patients must be positive")
        if self.days_per_patient <= 0 or self.prodrome_days <= 0:
            raise ValueError("day counts must be positive")
        for name in ("relapse_fraction", "missing_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class BehaviorProfile:
    baseline: np.ndarray   # (24, 6) circadian levels
    noise_std: np.ndarray  # (6,)
    trait_offset: np.ndarray  # (6,) additive shift from the sociability trait


@dataclass
class SynthCohort:
    patients_csv: str
    sensing_csv: str
    relapses_csv: str

    def write(self, out_dir):
        from pathlib import Path
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, payload in (("patients.csv", self.patients_csv),
                              ("sensing.csv", self.sensing_csv),
                              ("relapses.csv", self.relapses_csv)):
            path = out / name
            path.write_text(payload, encoding="utf-8")
            paths[name] = path
        return paths


def _truncated_normal(rng, mean, std, low, high):
    for _ in range(1000):
        v = rng.normal(mean, std)
        if low <= v <= high:
            return v
    return float(np.clip(v, low, high))


def _score(rng, z, mean, std, low, high):
    latent = _SCORE_TRAIT_LOADING * z + np.sqrt(1 - _SCORE_TRAIT_LOADING ** 2) * rng.normal()
    return float(np.clip(mean + std * latent, low, high))


def behavior_profile(trait_z: float, trait_effect: float,
                     rng: np.random.Generator) -> BehaviorProfile:
    """Patient-specific circadian baseline (shared shape plus a per-modality
    habit offset) and the sociability-trait shift on conversation/volume."""
    baseline = np.array([[_BASE[m][h] for m in MODALITIES] for h in range(24)],
                        dtype=np.float64)
    noise = np.array([_NOISE_STD[m] for m in MODALITIES])
    jitter = np.array([_BASELINE_JITTER[m] for m in MODALITIES])
    baseline = baseline + (jitter * noise * rng.normal(size=len(MODALITIES)))[None, :]
    offset = np.zeros(len(MODALITIES))
    for m, name in enumerate(MODALITIES):
        if name in TRAIT_MODALITIES:
            offset[m] = trait_effect * trait_z * _NOISE_STD[name]
    return BehaviorProfile(baseline, noise, offset)


def generate_cohort(spec: CohortSpec) -> SynthCohort:
    """Deterministic CSV payloads (patients, sensing, relapses) for the spec.

    Exactly round(relapse_fraction * n) patients relapse, chosen by seeded
    shuffle; relapse dates fall uniformly in [day 60, last day - 7] so every
    event has a full observation history.
    """
    root = np.random.default_rng(np.random.SeedSequence(spec.seed))
    width = max(3, len(str(spec.n_patients)))
    pids = [f"P{i:0{width}d}" for i in range(1, spec.n_patients + 1)]

    n_rel = int(np.floor(spec.relapse_fraction * spec.n_patients + 0.5))
    relapse_ids = set(np.array(pids)[root.permutation(spec.n_patients)[:n_rel]])
    if n_rel and spec.days_per_patient - 8 < 60:
        raise ValueError("days_per_patient too short to place relapses "
                         "(needs at least 68 days)")

    streams = np.random.SeedSequence(spec.seed).spawn(spec.n_patients)
    drift_mods = np.array([name in DRIFT_MODALITIES for name in MODALITIES])

    patient_lines = ["patient_id,age,bprs,sfs,cdss,gpts"]
    sensing_lines = ["patient_id,date,hour," + ",".join(MODALITIES)]
    relapse_lines = ["patient_id,relapse_date"]

    for pid, ss in zip(pids, streams):
        rng = np.random.default_rng(ss)
        z = rng.normal()
        age = _truncated_normal(rng, 37.2, 13.7, 18.0, 70.0)
        sfs = float(np.clip(100.0 + 15.0 * z, 55.0, 135.0))
        bprs = _score(rng, z, 40.0, 12.0, 20.0, 90.0)
        cdss = _score(rng, z, 6.0, 3.0, 0.0, 18.0)
        gpts = _score(rng, z, 60.0, 20.0, 32.0, 160.0)
        patient_lines.append(f"{pid},{age:.1f},{bprs:.1f},{sfs:.1f},{cdss:.1f},{gpts:.1f}")

        relapse_day = -1
        if pid in relapse_ids:
            relapse_day = int(rng.integers(60, spec.days_per_patient - 7))
            relapse_lines.append(
                f"{pid},{(START_DATE + timedelta(days=relapse_day)).isoformat()}")

        profile = behavior_profile(z, spec.trait_effect, rng)
        days = spec.days_per_patient
        values = (profile.baseline[None, :, :]
                  + profile.trait_offset[None, None, :]
                  + profile.noise_std[None, None, :] * rng.normal(size=(days, 24, 6)))
        if relapse_day >= 0:
            lo = max(0, relapse_day - spec.prodrome_days)
            shift = spec.drift_effect * profile.noise_std * drift_mods
            values[lo:relapse_day] -= shift[None, None, :]
        values = np.maximum(values, 0.0)
        missing = rng.random((days, 24, 6)) < spec.missing_rate

        for d in range(days):
            day_str = (START_DATE + timedelta(days=d)).isoformat()
            for h in range(24):
                cells = [
                    "" if missing[d, h, m] else f"{values[d, h, m]:.3f}"
                    for m in range(6)
                ]
                sensing_lines.append(f"{pid},{day_str},{h}," + ",".join(cells))

    return SynthCohort("\n".join(patient_lines) + "\n",
                       "\n".join(sensing_lines) + "\n",
                       "\n".join(relapse_lines) + "\n")
