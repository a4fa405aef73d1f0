import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_window
from relapse_bench.data import DAY_DIM, PatientProfile
from relapse_bench.personalization import (InsufficientDonorsError,
                                           NoPositiveInstancesError,
                                           build_personalized_subset,
                                           build_random_subset, combined_metric,
                                           distance_stratified_subset,
                                           metric_distance, rank_patients)


def profile(pid, age=30.0, bprs=40.0, sfs=100.0, cdss=5.0, gpts=60.0):
    return PatientProfile(pid, age, bprs, sfs, cdss, gpts)


class TestMetricDistance:
    def test_equal_ages(self):
        assert metric_distance(profile("a", age=30), profile("b", age=30), "age") == 0

    def test_age_difference(self):
        assert metric_distance(profile("a", age=25), profile("b", age=40), "age") == 15

    def test_sfs_difference(self):
        assert metric_distance(profile("a", sfs=110), profile("b", sfs=95), "sfs") == 15

    def test_unknown_metric(self):
        with pytest.raises(KeyError):
            metric_distance(profile("a"), profile("b"), "height")

    def test_missing_score_rejected(self):
        bad = profile("a", sfs=float("nan"))
        with pytest.raises(ValueError):
            metric_distance(bad, profile("b"), "sfs")


class TestCombinedMetric:
    def cohort(self):
        return [profile("lo", age=20, bprs=30, sfs=80, cdss=2, gpts=40),
                profile("hi", age=40, bprs=50, sfs=120, cdss=8, gpts=80),
                profile("mid", age=30, bprs=30, sfs=80, cdss=2, gpts=40)]

    def test_minimal_patient_zero(self):
        cohort = self.cohort()
        assert combined_metric(cohort[0], cohort) == 0.0

    def test_maximal_patient_one(self):
        cohort = self.cohort()
        assert combined_metric(cohort[1], cohort) == 1.0

    def test_midpoint_on_age_only(self):
        cohort = self.cohort()
        assert combined_metric(cohort[2], cohort) == pytest.approx(0.1)

    def test_constant_metric_contributes_half(self):
        cohort = [profile("a", age=30, bprs=10, sfs=80, cdss=0, gpts=40),
                  profile("b", age=30, bprs=20, sfs=90, cdss=9, gpts=70)]
        # age constant -> 0.5; all others minimal for patient a -> 0
        assert combined_metric(cohort[0], cohort) == pytest.approx(0.1)

    def test_affine_rescaling_invariance(self):
        cohort = self.cohort()
        rescaled = [PatientProfile(p.patient_id, p.age * 10 + 3, p.bprs, p.sfs,
                                   p.cdss, p.gpts) for p in cohort]
        for orig, scaled in zip(cohort, rescaled):
            assert combined_metric(orig, cohort) == \
                pytest.approx(combined_metric(scaled, rescaled), abs=1e-12)


class TestRankPatients:
    def test_tie_broken_by_patient_id(self):
        test = profile("t", age=25)
        cands = [profile("c", age=40), profile("b", age=30), profile("a", age=20)]
        ranking = rank_patients(test, cands, "age")
        assert ranking.patient_ids() == ["a", "b", "c"]
        assert np.allclose(ranking.distances(), [5, 5, 15])

    def test_single_candidate(self):
        ranking = rank_patients(profile("t"), [profile("only")], "sfs")
        assert ranking.patient_ids() == ["only"]

    def test_excludes_test_patient(self):
        with pytest.raises(ValueError):
            rank_patients(profile("t"), [profile("t")], "age")

    def test_empty_candidates(self):
        with pytest.raises(ValueError):
            rank_patients(profile("t"), [], "age")

    def test_matches_brute_force_oracle_100_cohorts(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            n = int(rng.integers(2, 12))
            cands = [profile(f"p{j}", age=float(rng.integers(18, 70)),
                             sfs=float(rng.integers(55, 135)))
                     for j in range(n)]
            test = profile("t", age=float(rng.integers(18, 70)),
                           sfs=float(rng.integers(55, 135)))
            metric = ["age", "sfs"][trial % 2]
            got = rank_patients(test, cands, metric).patient_ids()
            # oracle: exhaustive stable sort on (|diff|, id)
            expected = [c.patient_id for c in
                        sorted(cands, key=lambda c: (abs(c.metric_value(metric)
                                                         - test.metric_value(metric)),
                                                     c.patient_id))]
            assert got == expected, trial


def windows_for(pid, n_pos, n_neg, dim=6):
    out = []
    rng = np.random.default_rng(hash(pid) % (2 ** 32))
    for i in range(n_pos):
        out.append(make_window(pid, 1, rng.uniform(size=(2, DAY_DIM)), start_day=9 * i))
    for i in range(n_neg):
        out.append(make_window(pid, 0, rng.uniform(size=(2, DAY_DIM)),
                               start_day=9 * (n_pos + i)))
    return out


def ranking_for(test_pid, candidate_sfs):
    test = profile(test_pid, sfs=100.0)
    cands = [profile(pid, sfs=sfs) for pid, sfs in candidate_sfs.items()]
    return rank_patients(test, cands, "sfs")


class TestSubsets:
    def setup_method(self):
        # donors at increasing SFS distance from the test patient (sfs 100)
        self.sfs = {"n1": 101.0, "n2": 103.0, "n3": 110.0, "n4": 130.0}
        self.windows = (windows_for("n1", 1, 4) + windows_for("n2", 2, 4) +
                        windows_for("n3", 0, 4) + windows_for("n4", 2, 10))
        self.ranking = ranking_for("t", self.sfs)

    def test_balanced_and_all_relapse_included(self):
        subset = build_personalized_subset(self.windows, self.ranking, rng_seed=4)
        assert subset.n_rel == 5
        assert len(subset.nonrelapse_windows) == 5
        assert all(w.label == 1 for w in subset.relapse_windows)
        assert all(w.label == 0 for w in subset.nonrelapse_windows)

    def test_nearest_donor_pool_rule(self):
        # n1 + n2 pool is 8 >= 5 relapse windows: donors stop at n2
        subset = build_personalized_subset(self.windows, self.ranking, rng_seed=4)
        assert set(subset.donor_ids) == {"n1", "n2"}

    def test_single_donor_when_pool_sufficient(self):
        windows = windows_for("n1", 0, 10) + windows_for("n2", 3, 2)
        subset = build_personalized_subset(windows, self.ranking, rng_seed=0)
        assert subset.donor_ids == ["n1"]

    def test_deterministic_given_seed(self):
        a = build_personalized_subset(self.windows, self.ranking, rng_seed=7)
        b = build_personalized_subset(self.windows, self.ranking, rng_seed=7)
        assert [w.key for w in a.windows()] == [w.key for w in b.windows()]

    def test_no_positives_error(self):
        with pytest.raises(NoPositiveInstancesError):
            build_personalized_subset(windows_for("n1", 0, 5), self.ranking, 0)

    def test_random_subset_balanced(self):
        subset = build_random_subset(self.windows, rng_seed=3)
        assert subset.n_rel == 5 and len(subset.nonrelapse_windows) == 5

    def test_random_relapse_fixed_nonrelapse_varies(self):
        subsets = [build_random_subset(self.windows, rng_seed=s) for s in range(10)]
        rel_keys = {tuple(w.key for w in s.relapse_windows) for s in subsets}
        nonrel_keys = {tuple(w.key for w in s.nonrelapse_windows) for s in subsets}
        assert len(rel_keys) == 1
        assert len(nonrel_keys) > 1

    def test_random_union_covers_many_donors(self):
        donors = set()
        for s in range(10):
            donors.update(build_random_subset(self.windows, rng_seed=s).donor_ids)
        assert len(donors) > 1

    def test_closest_stratum_equals_personalized(self):
        a = build_personalized_subset(self.windows, self.ranking, rng_seed=5)
        b = distance_stratified_subset(self.windows, self.ranking, "closest", rng_seed=5)
        assert [w.key for w in a.windows()] == [w.key for w in b.windows()]

    def test_insufficient_donors_no_wrap(self):
        windows = windows_for("n1", 0, 50) + windows_for("n2", 3, 1) + \
            windows_for("n3", 0, 1) + windows_for("n4", 0, 1)
        with pytest.raises(InsufficientDonorsError):
            distance_stratified_subset(windows, self.ranking, "median", rng_seed=0)


class TestStratumStartIndex:
    def test_median_on_8_candidates(self):
        sfs = {f"p{i}": 100.0 + i + 1 for i in range(8)}  # distances 1..8
        ranking = ranking_for("t", sfs)
        windows = []
        for i in range(8):
            windows.append(make_window(f"p{i}", 0, np.zeros((2, DAY_DIM)), start_day=i))
        windows += windows_for("rel", 2, 0)
        subset = distance_stratified_subset(windows, ranking, "median", rng_seed=0)
        assert set(subset.donor_ids) <= {"p4", "p5", "p6", "p7"}

    def test_first_quartile_on_4_candidates(self):
        sfs = {f"p{i}": 100.0 + i + 1 for i in range(4)}
        ranking = ranking_for("t", sfs)
        windows = []
        for i in range(4):
            windows.append(make_window(f"p{i}", 0, np.zeros((2, DAY_DIM)), start_day=i))
        windows += windows_for("rel", 1, 0)
        subset = distance_stratified_subset(windows, ranking, "first_quartile", 0)
        assert set(subset.donor_ids) <= {"p1", "p2", "p3"}
        assert "p0" not in subset.donor_ids


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_subset_invariants_random_cohorts(seed):
    rng = np.random.default_rng(seed)
    n_patients = int(rng.integers(3, 8))
    windows = []
    sfs = {}
    for j in range(n_patients):
        pid = f"p{j}"
        sfs[pid] = float(rng.integers(55, 135))
        windows += windows_for(pid, int(rng.integers(0, 3)), int(rng.integers(1, 6)))
    if not any(w.label == 1 for w in windows):
        return
    n_rel = sum(w.label for w in windows)
    if sum(1 - w.label for w in windows) < n_rel:
        return
    ranking = ranking_for("t", sfs)
    for builder in (lambda: build_personalized_subset(windows, ranking, seed),
                    lambda: build_random_subset(windows, seed)):
        subset = builder()
        assert len(subset.nonrelapse_windows) == subset.n_rel
        assert all(w.patient_id != "t" for w in subset.windows())
        keys = [w.key for w in subset.nonrelapse_windows]
        assert len(set(keys)) == len(keys)  # sampled without replacement


def test_personalized_donor_distance_not_worse_than_random():
    rng = np.random.default_rng(1)
    for seed in range(10):
        sfs = {f"p{j}": float(rng.uniform(55, 135)) for j in range(12)}
        windows = []
        for pid in sfs:
            windows += windows_for(pid, 1, 4)
        ranking = ranking_for("t", sfs)
        pers = build_personalized_subset(windows, ranking, seed)
        rand = build_random_subset(windows, seed)
        dist = {pid: abs(100.0 - v) for pid, v in sfs.items()}
        mean_pers = np.mean([dist[p] for p in pers.donor_ids])
        mean_rand = np.mean([dist[p] for p in rand.donor_ids])
        assert mean_pers <= mean_rand + 1e-12
