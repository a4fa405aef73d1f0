from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relapse_bench.data import (DAY_DIM, Cohort, DataValidationError, Normalizer,
                                PatientDays, WindowConfig, apply_normalizer,
                                build_day_vectors, cohort_reference_stats,
                                fit_normalizer, impute_missing, ingest_cohort,
                                label_week, make_windows, modality_columns)
from oracles import positive_weeks_reference

BASE = date(2023, 1, 2)


def write_cohort(tmp_path, patients, sensing, relapses):
    p = tmp_path / "patients.csv"
    s = tmp_path / "sensing.csv"
    r = tmp_path / "relapses.csv"
    p.write_text("patient_id,age,bprs,sfs,cdss,gpts\n" + patients)
    s.write_text("patient_id,date,hour,light,volume,conversation,distance,acc,screen\n"
                 + sensing)
    r.write_text("patient_id,relapse_date\n" + relapses)
    return p, s, r


GOOD_PATIENTS = "A,30,40,100,5,60\nB,45,35,90,6,70\n"


class TestIngest:
    def test_valid_cohort(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS,
                             "A,2023-01-02,0,1,2,3,4,5,6\n"
                             "B,2023-01-02,5,1,2,3,4,5,6\n",
                             "A,2023-01-02\n")
        cohort = ingest_cohort(*paths)
        assert set(cohort.patients) == {"A", "B"}
        assert cohort.relapses["A"] == [date(2023, 1, 2)]
        assert cohort.summary()["relapse_instances"] == 1

    def test_duplicate_rows_averaged(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS,
                             "A,2023-01-02,3,2,,,,,\nA,2023-01-02,3,4,,,,,\n", "")
        cohort = ingest_cohort(*paths)
        means = cohort.hourly["A"][(date(2023, 1, 2), 3)]
        assert means[0] == 3.0  # light = mean(2, 4)
        assert np.isnan(means[1])

    def test_unknown_patient_names_row(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS,
                             "A,2023-01-02,0,1,,,,,\nZZ,2023-01-02,1,1,,,,,\n", "")
        with pytest.raises(DataValidationError, match=r"sensing\.csv:3"):
            ingest_cohort(*paths)

    def test_hour_out_of_range(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS, "A,2023-01-02,24,1,,,,,\n", "")
        with pytest.raises(DataValidationError, match=r"hour .* outside"):
            ingest_cohort(*paths)

    def test_non_numeric_value(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS, "A,2023-01-02,0,abc,,,,,\n", "")
        with pytest.raises(DataValidationError, match="non-numeric"):
            ingest_cohort(*paths)

    def test_empty_sensing(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS, "", "")
        with pytest.raises(DataValidationError, match="no sensing rows"):
            ingest_cohort(*paths)

    def test_empty_cohort(self, tmp_path):
        paths = write_cohort(tmp_path, "", "A,2023-01-02,0,1,,,,,\n", "")
        with pytest.raises(DataValidationError, match="empty cohort"):
            ingest_cohort(*paths)

    def test_relapse_outside_span_rejected(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS,
                             "A,2023-01-02,0,1,,,,,\n", "A,2024-06-01\n")
        with pytest.raises(DataValidationError, match="monitoring span"):
            ingest_cohort(*paths)

    def test_63_patient_cohort(self, tmp_path):
        patients = "".join(f"P{i:02d},30,40,100,5,60\n" for i in range(63))
        sensing = "".join(f"P{i:02d},2023-01-02,0,1,2,3,4,5,6\n" for i in range(63))
        cohort = ingest_cohort(*write_cohort(tmp_path, patients, sensing, ""))
        assert cohort.summary()["patients"] == 63


class TestDayVectors:
    def test_hour_major_layout_and_modality_order(self, tmp_path):
        # one fully observed hour: light=1 .. screen=6 land at columns 5*6..5*6+5
        paths = write_cohort(tmp_path, GOOD_PATIENTS,
                             "A,2023-01-02,5,1,2,3,4,5,6\n"
                             "B,2023-01-02,0,9,9,9,9,9,9\n", "")
        days = build_day_vectors(ingest_cohort(*paths))
        vec = days["A"].day(0)
        assert vec.values.shape == (DAY_DIM,)
        cols = slice(5 * 6, 5 * 6 + 6)
        assert np.array_equal(vec.values[cols], [1, 2, 3, 4, 5, 6])
        assert vec.observed_mask[cols].all()
        assert vec.observed_mask.sum() == 6

    def test_calendar_gap_emits_masked_days(self, tmp_path):
        paths = write_cohort(tmp_path, GOOD_PATIENTS,
                             "A,2023-01-02,0,1,,,,,\nA,2023-01-06,0,1,,,,,\n"
                             "B,2023-01-02,0,1,,,,,\n", "")
        days = build_day_vectors(ingest_cohort(*paths))
        assert days["A"].n_days == 5
        fully_masked = [not days["A"].mask[i].any() for i in range(5)]
        assert fully_masked == [False, True, True, True, False]

    def test_fully_observed_day(self, tmp_path):
        sensing = "".join(f"A,2023-01-02,{h},1,2,3,4,5,6\n" for h in range(24))
        paths = write_cohort(tmp_path, GOOD_PATIENTS,
                             sensing + "B,2023-01-02,0,1,,,,,\n", "")
        days = build_day_vectors(ingest_cohort(*paths))
        assert days["A"].mask[0].all()
        assert np.array_equal(days["A"].values[0].reshape(24, 6),
                              np.tile([1, 2, 3, 4, 5, 6], (24, 1)))


def patient_days(pid, values, mask):
    return PatientDays(pid, BASE, np.asarray(values, dtype=float),
                       np.asarray(mask, dtype=bool))


class TestImpute:
    def test_identity_when_nothing_missing(self):
        values = np.random.default_rng(0).normal(size=(4, DAY_DIM))
        pd = patient_days("A", values, np.ones_like(values))
        out = impute_missing({"A": pd}, np.zeros(DAY_DIM))
        assert np.array_equal(out["A"].values, values)

    def test_patient_median_used(self):
        values = np.zeros((4, DAY_DIM))
        mask = np.zeros((4, DAY_DIM), dtype=bool)
        col = 9 * 6 + 0  # hour 9, light
        values[:3, col] = [10.0, 20.0, 30.0]
        mask[:3, col] = True
        out = impute_missing({"A": patient_days("A", values, mask)},
                             np.full(DAY_DIM, 99.0))
        assert out["A"].values[3, col] == 20.0
        assert not out["A"].mask[3, col]

    def test_cohort_median_fallback(self):
        values = np.zeros((2, DAY_DIM))
        mask = np.zeros((2, DAY_DIM), dtype=bool)
        ref = np.full(DAY_DIM, 7.5)
        out = impute_missing({"A": patient_days("A", values, mask)}, ref)
        assert np.all(out["A"].values == 7.5)

    def test_reference_stats_median_of_observed(self):
        values = np.zeros((3, DAY_DIM))
        mask = np.zeros((3, DAY_DIM), dtype=bool)
        values[:, 0] = [1.0, 5.0, 100.0]
        mask[:, 0] = True
        stats = cohort_reference_stats({"A": patient_days("A", values, mask)})
        assert stats[0] == 5.0
        assert stats[1] == 0.0  # never observed anywhere


class TestNormalizer:
    def test_midpoint(self):
        norm = fit_normalizer(np.array([[0.0], [10.0]]))
        assert apply_normalizer(norm, np.array([[5.0]]))[0, 0] == 0.5

    def test_clamps_out_of_range(self):
        norm = fit_normalizer(np.array([[0.0], [10.0]]))
        assert apply_normalizer(norm, np.array([[20.0]]))[0, 0] == 1.0
        assert apply_normalizer(norm, np.array([[-3.0]]))[0, 0] == 0.0

    def test_degenerate_dimension_maps_to_half(self):
        norm = fit_normalizer(np.array([[4.0], [4.0]]))
        out = apply_normalizer(norm, np.array([[4.0], [7.0], [1.0]]))
        assert np.all(out == 0.5)

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_output_always_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        train = rng.normal(size=(5, 3)) * rng.uniform(0.0, 10.0, size=3)
        test = rng.normal(size=(8, 3)) * 20.0
        out = apply_normalizer(fit_normalizer(train), test)
        assert np.all((out >= 0.0) & (out <= 1.0))


class TestLabelWeek:
    def day(self, n):
        return BASE + timedelta(days=n)

    def test_week_inside_prodrome(self):
        assert label_week(self.day(75), [self.day(100)], 30) == 1

    def test_week_far_before(self):
        assert label_week(self.day(30), [self.day(100)], 30) == 0

    def test_week_containing_relapse(self):
        assert label_week(self.day(98), [self.day(100)], 30) == 1

    def test_week_after_relapse_negative(self):
        assert label_week(self.day(101), [self.day(100)], 30) == 0

    @given(st.integers(0, 200), st.integers(0, 200), st.integers(1, 60),
           st.integers(0, 30))
    @settings(max_examples=200, deadline=None)
    def test_monotone_under_horizon(self, week_start, relapse, horizon, extra):
        small = label_week(self.day(week_start), [self.day(relapse)], horizon)
        large = label_week(self.day(week_start), [self.day(relapse)], horizon + extra)
        assert large >= small


def full_patient(pid, n_days, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.uniform(size=(n_days, DAY_DIM))
    return patient_days(pid, values, np.ones_like(values))


class TestMakeWindows:
    def test_exactly_one_window_for_35_days(self):
        windows, _ = make_windows({"A": full_patient("A", 35)}, {})
        assert len(windows["A"]) == 1
        assert windows["A"][0].window_start == BASE

    def test_zero_windows_for_34_days(self):
        windows, _ = make_windows({"A": full_patient("A", 34)}, {})
        assert windows["A"] == []

    def test_two_windows_for_42_days(self):
        windows, _ = make_windows({"A": full_patient("A", 42)}, {})
        starts = [w.window_start for w in windows["A"]]
        assert starts == [BASE, BASE + timedelta(days=7)]

    def test_input_days_consecutive_and_precede_target(self):
        windows, _ = make_windows({"A": full_patient("A", 70)}, {})
        for w in windows["A"]:
            assert w.features.shape == (28, DAY_DIM)
            assert w.target_week_start == w.window_start + timedelta(days=28)

    def test_low_coverage_window_dropped_and_counted(self):
        pd = full_patient("A", 35)
        pd.mask[:20] = False  # 20 of 28 input days fully masked
        windows, dropped = make_windows({"A": pd}, {})
        assert windows["A"] == [] and dropped == 1

    def test_positive_count_matches_brute_force(self):
        for relapse_day, n_days in [(60, 100), (40, 80), (95, 100), (70, 120)]:
            windows, _ = make_windows(
                {"A": full_patient("A", n_days)},
                {"A": [BASE + timedelta(days=relapse_day)]})
            got = sum(w.label for w in windows["A"])
            expected = positive_weeks_reference(relapse_day, 30, 28, n_days, 7)
            assert got == expected, (relapse_day, n_days)

    def test_deterministic(self):
        a, _ = make_windows({"A": full_patient("A", 60, seed=4)},
                            {"A": [BASE + timedelta(days=40)]})
        b, _ = make_windows({"A": full_patient("A", 60, seed=4)},
                            {"A": [BASE + timedelta(days=40)]})
        assert [(w.window_start, w.label) for w in a["A"]] == \
               [(w.window_start, w.label) for w in b["A"]]

    def test_post_relapse_exclusion(self):
        cfg = WindowConfig(post_relapse_exclusion_days=60)
        relapse = [BASE + timedelta(days=40)]
        with_excl, _ = make_windows({"A": full_patient("A", 100)}, {"A": relapse}, cfg)
        without, _ = make_windows({"A": full_patient("A", 100)}, {"A": relapse})
        excluded = {w.target_week_start for w in without["A"]} - \
                   {w.target_week_start for w in with_excl["A"]}
        for t in excluded:
            assert relapse[0] < t <= relapse[0] + timedelta(days=60)
        assert excluded


def test_modality_columns_unimodal_width():
    cols = modality_columns(["conversation"])
    assert cols.shape == (24,)
    assert cols[0] == 2 and cols[1] == 8  # conversation is modality index 2
