"""Patient-similarity ranking and balanced training-subset construction.

A training subset always contains every relapse-labeled window in the
training fold plus an equal number of non-relapse windows; the three
builders differ only in which patients donate the non-relapse windows.
"""

from dataclasses import dataclass

import numpy as np

from .data import METRIC_FIELDS, PatientProfile
from .util import derive_rng

PERSONALIZATION_METRICS = METRIC_FIELDS + ("combined",)
STRATA = ("closest", "first_quartile", "median")


class NoPositiveInstancesError(ValueError):
    pass


class InsufficientDonorsError(ValueError):
    pass


@dataclass
class SimilarityRanking:
    test_patient_id: str
    entries: list  # (patient_id, distance), distance ascending, ties by id
    metric: str

    def patient_ids(self):
        return [pid for pid, _ in self.entries]

    def distances(self):
        return np.array([d for _, d in self.entries])


@dataclass
class TrainingSubset:
    relapse_windows: list
    nonrelapse_windows: list
    provenance: str
    donor_ids: list   # patients donating non-relapse windows, sorted
    metric: str | None
    seed: int

    @property
    def n_rel(self) -> int:
        return len(self.relapse_windows)

    def windows(self):
        return self.relapse_windows + self.nonrelapse_windows

    def labels(self) -> np.ndarray:
        return np.array([w.label for w in self.windows()], dtype=np.float64)


def combined_metric(profile: PatientProfile, cohort) -> float:
    """Mean of the five min-max-scaled metrics over the given cohort.
    A metric constant across the cohort contributes 0.5."""
    cohort = list(cohort)
    if len(cohort) < 2:
        raise ValueError("combined metric needs a cohort of >= 2 patients")
    total = 0.0
    for name in METRIC_FIELDS:
        values = [p.metric_value(name) for p in cohort]
        lo, hi = min(values), max(values)
        if hi == lo:
            total += 0.5
        else:
            total += (profile.metric_value(name) - lo) / (hi - lo)
    return total / len(METRIC_FIELDS)


def metric_distance(a: PatientProfile, b: PatientProfile, metric: str,
                    cohort=None) -> float:
    """|value_a - value_b| for scalar metrics; for the combined metric the
    values are cohort min-max scaled first (cohort required)."""
    if metric == "combined":
        if cohort is None:
            raise ValueError("combined metric distance requires the cohort")
        return abs(combined_metric(a, cohort) - combined_metric(b, cohort))
    va, vb = a.metric_value(metric), b.metric_value(metric)
    if not (np.isfinite(va) and np.isfinite(vb)):
        raise ValueError(f"missing {metric} score for {a.patient_id} or {b.patient_id}")
    return abs(va - vb)


def rank_patients(test: PatientProfile, candidates, metric: str) -> SimilarityRanking:
    """Candidates ordered by ascending metric distance to the test patient,
    ties broken by ascending patient id."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate patients to rank")
    if any(c.patient_id == test.patient_id for c in candidates):
        raise ValueError("candidates must exclude the test patient")
    cohort = candidates + [test] if metric == "combined" else None
    scored = [(metric_distance(test, c, metric, cohort), c.patient_id) for c in candidates]
    scored.sort()
    return SimilarityRanking(test.patient_id, [(pid, d) for d, pid in scored], metric)


def _ordered_nonrelapse(windows):
    pool = [w for w in windows if w.label == 0]
    pool.sort(key=lambda w: (w.patient_id, w.window_start))
    return pool


def _sample_pool(pool, n, rng_seed, provenance, donor_ids, metric):
    rng = derive_rng(rng_seed, "subset")
    idx = rng.choice(len(pool), size=n, replace=False)
    chosen = [pool[i] for i in sorted(idx)]
    donors = sorted({w.patient_id for w in chosen}) if provenance == "random" \
        else sorted(donor_ids)
    return chosen, donors


def _walk_ranking(training_windows, ranking, start: int, n_rel: int):
    """Accumulate non-relapse windows patient by patient from ranking[start:]
    until the pool covers n_rel; returns (pool, donor ids walked)."""
    by_patient = {}
    for w in training_windows:
        if w.label == 0:
            by_patient.setdefault(w.patient_id, []).append(w)
    for ws in by_patient.values():
        ws.sort(key=lambda w: w.window_start)
    pool = []
    donors = []
    for pid, _ in ranking.entries[start:]:
        ws = by_patient.get(pid, [])
        if ws:
            pool.extend(ws)
            donors.append(pid)
        if len(pool) >= n_rel:
            return pool, donors
    raise InsufficientDonorsError(
        f"insufficient donors: pool of {len(pool)} non-relapse windows "
        f"cannot cover {n_rel} relapse windows")


def _relapse_windows(training_windows):
    rel = [w for w in training_windows if w.label == 1]
    if not rel:
        raise NoPositiveInstancesError("no positive instances in training set")
    rel.sort(key=lambda w: (w.patient_id, w.window_start))
    return rel


def build_personalized_subset(training_windows, ranking: SimilarityRanking,
                              rng_seed: int) -> TrainingSubset:
    """All relapse windows plus n_rel non-relapse windows sampled from the
    nearest-ranked patients whose pooled windows cover n_rel."""
    rel = _relapse_windows(training_windows)
    pool, donors = _walk_ranking(training_windows, ranking, 0, len(rel))
    chosen, donor_ids = _sample_pool(pool, len(rel), rng_seed, "personalized",
                                     donors, ranking.metric)
    return TrainingSubset(rel, chosen, "personalized", donor_ids, ranking.metric, rng_seed)


def build_random_subset(training_windows, rng_seed: int) -> TrainingSubset:
    """All relapse windows plus n_rel non-relapse windows sampled uniformly
    from every training patient."""
    rel = _relapse_windows(training_windows)
    pool = _ordered_nonrelapse(training_windows)
    if len(pool) < len(rel):
        raise InsufficientDonorsError(
            f"insufficient donors: {len(pool)} non-relapse windows for "
            f"{len(rel)} relapse windows")
    chosen, donor_ids = _sample_pool(pool, len(rel), rng_seed, "random", [], None)
    return TrainingSubset(rel, chosen, "random", donor_ids, None, rng_seed)


def distance_stratified_subset(training_windows, ranking: SimilarityRanking,
                               stratum: str, rng_seed: int) -> TrainingSubset:
    """Like the personalized subset but donor accumulation starts at the
    first rank past the 25th (first_quartile) or 50th (median) percentile of
    the ranking distances; no wrap-around."""
    if stratum not in STRATA:
        raise ValueError(f"unknown stratum {stratum!r}")
    rel = _relapse_windows(training_windows)
    if stratum == "closest":
        start = 0
    else:
        dists = ranking.distances()
        q = 25.0 if stratum == "first_quartile" else 50.0
        cut = np.percentile(dists, q)
        beyond = np.nonzero(dists > cut)[0]
        if beyond.size == 0:
            raise InsufficientDonorsError(
                f"insufficient donors: no candidate beyond the {stratum} distance")
        start = int(beyond[0])
    pool, donors = _walk_ranking(training_windows, ranking, start, len(rel))
    chosen, donor_ids = _sample_pool(pool, len(rel), rng_seed, f"stratified({stratum})",
                                     donors, ranking.metric)
    return TrainingSubset(rel, chosen, f"stratified({stratum})", donor_ids,
                          ranking.metric, rng_seed)
