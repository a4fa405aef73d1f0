"""Cohort ingestion and the hourly-feature windowing pipeline.

A day is 144 values (24 hours x 6 modalities, hour-major); an observation
window is M consecutive days of those vectors plus the relapse label of the
following target week.
"""

import csv
import warnings
from dataclasses import dataclass, field, replace
from datetime import date, timedelta

import numpy as np

MODALITIES = ("light", "volume", "conversation", "distance", "acc", "screen")
N_MODALITIES = len(MODALITIES)
DAY_DIM = 24 * N_MODALITIES
NONNEGATIVE_MODALITIES = ("conversation", "distance", "screen")
METRIC_FIELDS = ("age", "bprs", "sfs", "cdss", "gpts")


class DataValidationError(ValueError):
    """Schema violation; carries file name and 1-based row number."""

    def __init__(self, message, filename=None, row=None):
        loc = ""
        if filename is not None:
            loc = f"{filename}"
            if row is not None:
                loc += f":{row}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")
        self.filename = filename
        self.row = row


@dataclass(frozen=True)
class PatientProfile:
    patient_id: str
    age: float
    bprs: float
    sfs: float
    cdss: float
    gpts: float

    def metric_value(self, name: str) -> float:
        if name not in METRIC_FIELDS:
            raise KeyError(f"unknown personalization metric {name!r}")
        return float(getattr(self, name))


@dataclass(frozen=True)
class RelapseEvent:
    patient_id: str
    relapse_date: date


@dataclass
class DayVector:
    patient_id: str
    date: date
    values: np.ndarray        # (144,) hour-major: hour 0 modalities 0..5, ...
    observed_mask: np.ndarray  # (144,) bool; imputed entries stay False


@dataclass
class PatientDays:
    """All of one patient's day vectors packed date-contiguously."""
    patient_id: str
    start: date
    values: np.ndarray  # (n_days, 144)
    mask: np.ndarray    # (n_days, 144) bool

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    def day(self, index: int) -> DayVector:
        return DayVector(self.patient_id, self.start + timedelta(days=index),
                         self.values[index], self.mask[index])

    def day_vectors(self):
        return [self.day(i) for i in range(self.n_days)]


@dataclass
class Cohort:
    patients: dict            # patient_id -> PatientProfile
    hourly: dict              # patient_id -> {(date, hour): (144-slot mean per modality)}
    relapses: dict            # patient_id -> sorted list of dates

    def relapse_events(self):
        return [RelapseEvent(pid, d) for pid in sorted(self.relapses)
                for d in self.relapses[pid]]

    def summary(self) -> dict:
        n_cells = 0
        n_observed = 0
        for pid, hours in self.hourly.items():
            if not hours:
                continue
            dates = [d for d, _ in hours]
            span = (max(dates) - min(dates)).days + 1
            n_cells += span * 24 * N_MODALITIES
            for vals in hours.values():
                n_observed += int(np.sum(~np.isnan(vals)))
        return {
            "patients": len(self.patients),
            "relapse_patients": sum(1 for v in self.relapses.values() if v),
            "relapse_instances": sum(len(v) for v in self.relapses.values()),
            "coverage": (n_observed / n_cells) if n_cells else 0.0,
        }


@dataclass(frozen=True)
class ObservationWindow:
    patient_id: str
    window_start: date
    features: np.ndarray        # (M, 144) view into PatientDays.values
    observed: np.ndarray        # (M, 144) bool view
    target_week_start: date
    label: int

    @property
    def key(self) -> tuple:
        return (self.patient_id, self.target_week_start.isoformat())

    def time_mean(self) -> np.ndarray:
        return self.features.mean(axis=0)


@dataclass(frozen=True)
class WindowConfig:
    m_days: int = 28
    step_days: int = 7
    horizon_days: int = 30
    missing_day_fraction_limit: float = 0.5
    post_relapse_exclusion_days: int = 0

    def __post_init__(self):
        if self.m_days <= 0 or self.step_days <= 0 or self.horizon_days <= 0:
            raise ValueError("window config counts must be positive")


@dataclass
class Normalizer:
    minimum: np.ndarray
    maximum: np.ndarray
    fitted_on: str = ""

    def digest_source(self) -> str:
        return " ".join(f"{v:.17g}" for v in np.concatenate([self.minimum, self.maximum]))


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _read_rows(path, expected_header, filename):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataValidationError(f"cannot open: {exc}", filename) from exc
    with fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise DataValidationError("file is empty (missing header)", filename, 1)
    header = [h.strip() for h in rows[0]]
    if header != list(expected_header):
        raise DataValidationError(
            f"bad header {header}, expected {list(expected_header)}", filename, 1)
    return rows[1:]


def _parse_float(text, filename, row, column, allow_missing=False):
    text = text.strip()
    if text == "":
        if allow_missing:
            return None
        raise DataValidationError(f"missing value in column {column!r}", filename, row)
    try:
        value = float(text)
    except ValueError:
        raise DataValidationError(
            f"non-numeric value {text!r} in column {column!r}", filename, row) from None
    if not np.isfinite(value):
        raise DataValidationError(f"non-finite value in column {column!r}", filename, row)
    return value


def _parse_date(text, filename, row):
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise DataValidationError(f"bad date {text!r} (expected YYYY-MM-DD)",
                                  filename, row) from None


def ingest_cohort(patients_csv, sensing_csv, relapses_csv) -> Cohort:
    """Parse and validate the three cohort CSVs.

    Duplicate (patient, date, hour) sensing rows are averaged per modality.
    Every violation raises DataValidationError naming file and row.
    """
    patients = {}
    header = ("patient_id",) + METRIC_FIELDS
    for i, row in enumerate(_read_rows(patients_csv, header, "patients.csv"), start=2):
        if len(row) != len(header):
            raise DataValidationError(f"expected {len(header)} fields, got {len(row)}",
                                      "patients.csv", i)
        pid = row[0].strip()
        if not pid:
            raise DataValidationError("empty patient_id", "patients.csv", i)
        if pid in patients:
            raise DataValidationError(f"duplicate patient_id {pid!r}", "patients.csv", i)
        scores = [_parse_float(row[k + 1], "patients.csv", i, name)
                  for k, name in enumerate(METRIC_FIELDS)]
        if scores[0] <= 0:
            raise DataValidationError("age must be positive", "patients.csv", i)
        patients[pid] = PatientProfile(pid, *scores)
    if not patients:
        raise DataValidationError("empty cohort: no patient rows", "patients.csv")

    header = ("patient_id", "date", "hour") + MODALITIES
    sums = {}
    counts = {}
    rows = _read_rows(sensing_csv, header, "sensing.csv")
    if not rows:
        raise DataValidationError("no sensing rows", "sensing.csv")
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataValidationError(f"expected {len(header)} fields, got {len(row)}",
                                      "sensing.csv", i)
        pid = row[0].strip()
        if pid not in patients:
            raise DataValidationError(f"unknown patient id {pid!r}", "sensing.csv", i)
        day = _parse_date(row[1], "sensing.csv", i)
        hour_f = _parse_float(row[2], "sensing.csv", i, "hour")
        hour = int(hour_f)
        if hour != hour_f or not 0 <= hour <= 23:
            raise DataValidationError(f"hour {row[2]!r} outside [0, 23]", "sensing.csv", i)
        key = (pid, day, hour)
        if key not in sums:
            sums[key] = np.zeros(N_MODALITIES)
            counts[key] = np.zeros(N_MODALITIES, dtype=int)
        for m, name in enumerate(MODALITIES):
            value = _parse_float(row[3 + m], "sensing.csv", i, name, allow_missing=True)
            if value is None:
                continue
            if name in NONNEGATIVE_MODALITIES and value < 0:
                raise DataValidationError(f"negative {name} value", "sensing.csv", i)
            sums[key][m] += value
            counts[key][m] += 1

    hourly = {pid: {} for pid in patients}
    for (pid, day, hour), total in sums.items():
        cnt = counts[(pid, day, hour)]
        means = np.full(N_MODALITIES, np.nan)
        seen = cnt > 0
        means[seen] = total[seen] / cnt[seen]
        hourly[pid][(day, hour)] = means

    relapses = {pid: [] for pid in patients}
    for i, row in enumerate(_read_rows(relapses_csv, ("patient_id", "relapse_date"),
                                       "relapses.csv"), start=2):
        if len(row) != 2:
            raise DataValidationError(f"expected 2 fields, got {len(row)}",
                                      "relapses.csv", i)
        pid = row[0].strip()
        if pid not in patients:
            raise DataValidationError(f"unknown patient id {pid!r}", "relapses.csv", i)
        day = _parse_date(row[1], "relapses.csv", i)
        if not hourly[pid]:
            raise DataValidationError(f"relapse for patient {pid!r} without sensing data",
                                      "relapses.csv", i)
        dates = [d for d, _ in hourly[pid]]
        if not min(dates) <= day <= max(dates):
            raise DataValidationError(
                f"relapse date {day} outside monitoring span of {pid!r}",
                "relapses.csv", i)
        relapses[pid].append(day)
    for pid in relapses:
        relapses[pid].sort()
    return Cohort(patients=patients, hourly=hourly, relapses=relapses)


# ---------------------------------------------------------------------------
# Day vectors, imputation, normalization
# ---------------------------------------------------------------------------

def build_day_vectors(cohort: Cohort) -> dict:
    """One packed PatientDays per patient, one row per calendar day between
    the patient's first and last observed dates; unobserved cells masked."""
    out = {}
    for pid in sorted(cohort.patients):
        hours = cohort.hourly[pid]
        if not hours:
            continue
        dates = [d for d, _ in hours]
        start, last = min(dates), max(dates)
        n_days = (last - start).days + 1
        values = np.zeros((n_days, DAY_DIM))
        mask = np.zeros((n_days, DAY_DIM), dtype=bool)
        for (day, hour), means in hours.items():
            row = (day - start).days
            for m in range(N_MODALITIES):
                if not np.isnan(means[m]):
                    col = hour * N_MODALITIES + m
                    values[row, col] = means[m]
                    mask[row, col] = True
        out[pid] = PatientDays(pid, start, values, mask)
    return out


def cohort_reference_stats(day_vectors: dict) -> np.ndarray:
    """Per-dimension median over every observed entry of the given patients
    (the imputation fallback).  Dimensions nobody observed fall back to 0."""
    stats = np.zeros(DAY_DIM)
    stacked_vals = np.concatenate([pd.values for pd in day_vectors.values()])
    stacked_mask = np.concatenate([pd.mask for pd in day_vectors.values()])
    for col in range(DAY_DIM):
        observed = stacked_vals[stacked_mask[:, col], col]
        if observed.size:
            stats[col] = np.median(observed)
    return stats


def impute_missing(day_vectors: dict, reference_stats: np.ndarray) -> dict:
    """Fill masked entries with the patient's per-(hour, modality) median over
    their observed days, falling back to the reference (training-cohort)
    median when the patient never observed that dimension.  Masks are kept so
    imputed cells remain identifiable."""
    reference_stats = np.asarray(reference_stats, dtype=np.float64)
    if reference_stats.shape != (DAY_DIM,):
        raise ValueError("reference_stats must have one entry per day dimension")
    if not day_vectors:
        raise ValueError("no day vectors to impute")
    out = {}
    for pid, pdays in day_vectors.items():
        observed = np.where(pdays.mask, pdays.values, np.nan)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
            medians = np.nanmedian(observed, axis=0)
        medians = np.where(np.isnan(medians), reference_stats, medians)
        filled = np.where(pdays.mask, pdays.values, medians)
        out[pid] = PatientDays(pid, pdays.start, filled, pdays.mask.copy())
    return out


def fit_normalizer(rows: np.ndarray, fitted_on: str = "") -> Normalizer:
    """Per-dimension min/max over training rows (n, 144)."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("need at least one training day vector")
    return Normalizer(rows.min(axis=0), rows.max(axis=0), fitted_on)


def apply_normalizer(norm: Normalizer, arr: np.ndarray) -> np.ndarray:
    """(x - min) / (max - min) clamped to [0, 1]; degenerate dimensions map
    to 0.5 everywhere."""
    arr = np.asarray(arr, dtype=np.float64)
    span = norm.maximum - norm.minimum
    degenerate = span == 0
    safe_span = np.where(degenerate, 1.0, span)
    scaled = np.clip((arr - norm.minimum) / safe_span, 0.0, 1.0)
    return np.where(degenerate, 0.5, scaled)


# ---------------------------------------------------------------------------
# Labeling and windowing
# ---------------------------------------------------------------------------

def label_week(target_week_start: date, relapse_dates, horizon: int = 30) -> int:
    """1 iff the week [start, start+6] intersects [r - horizon, r] for any
    relapse date r."""
    week_end = target_week_start + timedelta(days=6)
    for r in relapse_dates:
        if target_week_start <= r and week_end >= r - timedelta(days=horizon):
            return 1
    return 0


def make_windows(day_vectors: dict, relapses: dict, config: WindowConfig = WindowConfig()):
    """Sliding observation windows per patient.

    Windows start at the patient's first day and advance by `step_days`; a
    window is emitted only when input span plus target week fit inside the
    monitoring span.  Windows whose input exceeds the fully-masked-day limit
    are dropped.  Returns (dict patient_id -> ordered window list, dropped).
    """
    out = {}
    dropped = 0
    m, step = config.m_days, config.step_days
    for pid in sorted(day_vectors):
        pdays = day_vectors[pid]
        windows = []
        events = relapses.get(pid, [])
        fully_masked = ~pdays.mask.any(axis=1)
        start_idx = 0
        while start_idx + m + 7 <= pdays.n_days:
            target_start = pdays.start + timedelta(days=start_idx + m)
            if config.post_relapse_exclusion_days > 0 and any(
                    r < target_start <= r + timedelta(days=config.post_relapse_exclusion_days)
                    for r in events):
                start_idx += step
                continue
            missing = int(fully_masked[start_idx:start_idx + m].sum())
            if missing / m > config.missing_day_fraction_limit:
                dropped += 1
                start_idx += step
                continue
            windows.append(ObservationWindow(
                patient_id=pid,
                window_start=pdays.start + timedelta(days=start_idx),
                features=pdays.values[start_idx:start_idx + m],
                observed=pdays.mask[start_idx:start_idx + m],
                target_week_start=target_start,
                label=label_week(target_start, events, config.horizon_days)))
            start_idx += step
        out[pid] = windows
    return out, dropped


def modality_columns(modalities) -> np.ndarray:
    """Hour-major column indices selecting a modality subset."""
    idx = []
    for name in modalities:
        if name not in MODALITIES:
            raise ValueError(f"unknown modality {name!r}")
    wanted = [m for m, name in enumerate(MODALITIES) if name in set(modalities)]
    for hour in range(24):
        for m in wanted:
            idx.append(hour * N_MODALITIES + m)
    return np.array(idx, dtype=int)
