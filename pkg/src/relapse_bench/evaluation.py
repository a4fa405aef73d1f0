"""Leave-one-patient-out sequential evaluation and its derived analyses.

Every fold holds one patient out entirely; models, balancing subsets and
normalizers are built from the remaining patients only (asserted, not
assumed).  Headline F2 pools confusion counts across folds per seed and
averages over seeds.
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import (Cohort, WindowConfig, apply_normalizer, build_day_vectors,
                   cohort_reference_stats, fit_normalizer, impute_missing,
                   make_windows, modality_columns)
from .models.autoencoder import (AutoencoderConfig, anomaly_predict_window,
                                 fit_anomaly_detector, train_autoencoder)
from .models.forest import ForestConfig, rf_predict, train_rf, window_features
from .models.rpnet import RelapsePredNetConfig, train_relapseprednet
from .personalization import (InsufficientDonorsError, NoPositiveInstancesError,
                              TrainingSubset, build_personalized_subset,
                              build_random_subset, distance_stratified_subset,
                              metric_distance, rank_patients)
from .util import derive_rng, derive_seed

MODEL_FAMILIES = ("rpnet", "autoenc", "rf")
PERSONALIZATION_MODES = ("metric", "random", "none", "stratified")


class LeakageError(AssertionError):
    pass


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def add(self, label: int, prediction: int) -> None:
        if label and prediction:
            self.tp += 1
        elif label and not prediction:
            self.fn += 1
        elif prediction:
            self.fp += 1
        else:
            self.tn += 1

    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def precision_score(counts: ConfusionCounts) -> float:
    denom = counts.tp + counts.fp
    return counts.tp / denom if denom else 0.0


def recall_score(counts: ConfusionCounts) -> float:
    denom = counts.tp + counts.fn
    return counts.tp / denom if denom else 0.0


def f2_score(counts: ConfusionCounts) -> float:
    """F2 = 5 tp / (5 tp + 4 fn + fp), defined 0 when tp = 0 (algebraically
    identical to 5PR / (4P + R))."""
    if counts.tp == 0:
        return 0.0
    return 5.0 * counts.tp / (5.0 * counts.tp + 4.0 * counts.fn + counts.fp)


# ---------------------------------------------------------------------------
# Folds and results
# ---------------------------------------------------------------------------

@dataclass
class Fold:
    test_patient_id: str
    train_windows: list
    test_windows: list


def lopo_folds(windows_by_patient: dict) -> list:
    """One fold per patient: train = everyone else's windows."""
    pids = sorted(windows_by_patient)
    if len(pids) < 2:
        raise ValueError("leave-one-patient-out needs at least 2 patients")
    folds = []
    for pid in pids:
        train = [w for other in pids if other != pid for w in windows_by_patient[other]]
        folds.append(Fold(pid, train, list(windows_by_patient[pid])))
    return folds


@dataclass(frozen=True)
class WeeklyPrediction:
    patient_id: str
    week_start: str        # ISO date of the target week
    probability: float
    prediction: int
    label: int
    seed: int
    fold: str


@dataclass
class FoldResult:
    test_patient_id: str
    seed: int
    predictions: list = field(default_factory=list)  # WeeklyPrediction, date order
    donor_ids: list = field(default_factory=list)
    donor_distance: float | None = None
    provenance: str = ""
    skipped: bool = False
    skip_reason: str = ""

    def counts(self) -> ConfusionCounts:
        c = ConfusionCounts()
        for p in self.predictions:
            c.add(p.label, p.prediction)
        return c


@dataclass
class MetricsReport:
    f2: float
    precision: float
    recall: float
    per_patient_f2: float | None
    per_seed: list
    n_seeds: int
    skipped_folds: list
    config: dict
    provenance: list

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "n_seeds": self.n_seeds,
            "pooled": {"f2_mean": self.f2, "precision_mean": self.precision,
                       "recall_mean": self.recall,
                       "per_patient_f2_mean": self.per_patient_f2},
            "per_seed": self.per_seed,
            "skipped_folds": self.skipped_folds,
            "provenance": self.provenance,
        }


def per_patient_f2(fold_results) -> float:
    """Unweighted mean F2 over relapse patients only (patients with at least
    one positive-labeled window), each scored on their own counts."""
    by_patient = {}
    for fr in fold_results:
        for p in fr.predictions:
            by_patient.setdefault(p.patient_id, ConfusionCounts()).add(
                p.label, p.prediction)
    relapse = {pid: c for pid, c in by_patient.items() if c.tp + c.fn > 0}
    if not relapse:
        raise ValueError("no relapse patients in fold results")
    return float(np.mean([f2_score(c) for c in relapse.values()]))


def compute_report(fold_results, config: dict, seeds) -> MetricsReport:
    """Aggregate fold results: pooled counts per seed, mean across seeds.
    Rebuilding the report from stored results is idempotent."""
    seeds = list(seeds)
    per_seed_rows = []
    skipped = []
    provenance = []
    for seed in seeds:
        counts = ConfusionCounts()
        seed_results = [fr for fr in fold_results if fr.seed == seed]
        for fr in seed_results:
            if fr.skipped:
                skipped.append({"fold": fr.test_patient_id, "seed": seed,
                                "reason": fr.skip_reason})
                continue
            for p in fr.predictions:
                counts.add(p.label, p.prediction)
            provenance.append({"fold": fr.test_patient_id, "seed": seed,
                               "subset": fr.provenance, "donors": fr.donor_ids,
                               "donor_distance": fr.donor_distance})
        try:
            pp = per_patient_f2([fr for fr in seed_results if not fr.skipped])
        except ValueError:
            pp = None
        per_seed_rows.append({
            "seed": seed, "tp": counts.tp, "fp": counts.fp, "fn": counts.fn,
            "tn": counts.tn, "f2": f2_score(counts),
            "precision": precision_score(counts), "recall": recall_score(counts),
            "per_patient_f2": pp,
        })
    pp_values = [row["per_patient_f2"] for row in per_seed_rows
                 if row["per_patient_f2"] is not None]
    return MetricsReport(
        f2=float(np.mean([r["f2"] for r in per_seed_rows])),
        precision=float(np.mean([r["precision"] for r in per_seed_rows])),
        recall=float(np.mean([r["recall"] for r in per_seed_rows])),
        per_patient_f2=float(np.mean(pp_values)) if pp_values else None,
        per_seed=per_seed_rows, n_seeds=len(seeds), skipped_folds=skipped,
        config=config, provenance=provenance)


# ---------------------------------------------------------------------------
# The experiment runner
# ---------------------------------------------------------------------------

def _assert_no_leakage(windows, test_pid: str, context: str) -> None:
    for w in windows:
        if w.patient_id == test_pid:
            raise LeakageError(f"test patient {test_pid} window leaked into {context}")


def _fit_and_predict(family, subset_windows, labels, test_windows, *, seed,
                     threshold, loss, modalities, net_config, forest_config,
                     autoenc_config):
    """Train one model family on the given windows and return (probability,
    binary) arrays over the test windows."""
    if family == "rpnet":
        cfg = net_config or RelapsePredNetConfig()
        cfg = dataclasses.replace(cfg, loss=loss, modalities=modalities,
                                  threshold=threshold)
        subset = _WindowsWithLabels(subset_windows, labels)
        model = train_relapseprednet(subset, cfg, seed=seed)
        probs = model.predict_batch(test_windows)
        return probs, (probs > threshold).astype(int)
    if family == "rf":
        cfg = forest_config or ForestConfig()
        cfg = dataclasses.replace(cfg, modalities=modalities, threshold=threshold)
        rows = window_features(subset_windows, modalities)
        norm = fit_normalizer(rows, "training-subset")
        forest = train_rf(apply_normalizer(norm, rows), labels, cfg, seed=seed)
        test_rows = apply_normalizer(norm, window_features(test_windows, modalities))
        probs = rf_predict(forest, test_rows)
        return probs, (probs > threshold).astype(int)
    if family == "autoenc":
        cfg = autoenc_config or AutoencoderConfig()
        if modalities:
            cfg = dataclasses.replace(
                cfg, layer_sizes=(24 * len(modalities),) + tuple(cfg.layer_sizes[1:]))
        day_rows = np.concatenate([np.asarray(w.features, dtype=np.float64)
                                   for w in subset_windows])
        if modalities:
            day_rows = day_rows[:, modality_columns(modalities)]
        norm = fit_normalizer(day_rows, "training-subset")
        healthy = [w for w, y in zip(subset_windows, labels) if y == 0]
        healthy_rows = np.concatenate([np.asarray(w.features, dtype=np.float64)
                                       for w in healthy])
        if modalities:
            healthy_rows = healthy_rows[:, modality_columns(modalities)]
        encoder = train_autoencoder(apply_normalizer(norm, healthy_rows), cfg, seed=seed)
        labeled = _WindowsWithLabels(subset_windows, labels)
        detector = fit_anomaly_detector(encoder, labeled.windows_with_labels(),
                                        norm, modalities=modalities)
        pairs = [anomaly_predict_window(detector, w) for w in test_windows]
        probs = np.array([p for p, _ in pairs])
        return probs, np.array([int(b) for _, b in pairs])
    raise ValueError(f"unknown model family {family!r}")


class _WindowsWithLabels:
    """Adapter giving explicit-label window lists the TrainingSubset API."""

    def __init__(self, window_list, label_array):
        self._windows = list(window_list)
        self._labels = np.asarray(label_array, dtype=np.float64)

    def windows(self):
        return self._windows

    def labels(self):
        return self._labels

    def windows_with_labels(self):
        out = []
        for w, y in zip(self._windows, self._labels):
            out.append(dataclasses.replace(w, label=int(y)) if w.label != y else w)
        return out


def _build_subset(personalization, train_windows, ranking, stratum, subset_seed):
    if personalization == "metric":
        return build_personalized_subset(train_windows, ranking, subset_seed)
    if personalization == "random":
        return build_random_subset(train_windows, subset_seed)
    if personalization == "stratified":
        return distance_stratified_subset(train_windows, ranking, stratum, subset_seed)
    raise ValueError(f"unknown personalization mode {personalization!r}")


def run_experiment(cohort: Cohort, model_family: str = "rpnet", metric: str = "sfs",
                   seeds=None, *, personalization: str = "metric",
                   stratum: str = "closest", loss: str = "bce", modalities=None,
                   window_config: WindowConfig | None = None,
                   net_config: RelapsePredNetConfig | None = None,
                   forest_config: ForestConfig | None = None,
                   autoenc_config: AutoencoderConfig | None = None,
                   threshold: float = 0.5, workers: int = 1,
                   test_patients=None, distance_metric: str | None = None):
    """Full LOPO evaluation.

    For each seed and fold: build the training subset, fit the normalizer on
    subset donors, train, then predict every held-out window sequentially.
    Returns (fold_results, MetricsReport).  Fold isolation (imputation
    reference stats, normalizer, subset) is structural: a test-patient window
    inside any training artifact raises LeakageError.
    """
    if model_family not in MODEL_FAMILIES:
        raise ValueError(f"unknown model family {model_family!r}")
    if personalization not in PERSONALIZATION_MODES:
        raise ValueError(f"unknown personalization mode {personalization!r}")
    seeds = list(seeds) if seeds is not None else list(range(10))
    if not seeds:
        raise ValueError("need at least one seed")
    wc = window_config or WindowConfig()
    report_metric = distance_metric or (metric if metric != "combined" else "sfs")
    day_vecs = build_day_vectors(cohort)
    pids = sorted(day_vecs)
    if len(pids) < 2:
        raise ValueError("cohort has fewer than 2 patients with data")
    fold_pids = sorted(test_patients) if test_patients else pids
    profiles = cohort.patients

    def fold_task(test_pid: str) -> list:
        train_pids = [p for p in pids if p != test_pid]
        ref_stats = cohort_reference_stats({p: day_vecs[p] for p in train_pids})
        imputed = impute_missing(day_vecs, ref_stats)
        windows, _ = make_windows(imputed, cohort.relapses, wc)
        train_windows = [w for p in train_pids for w in windows[p]]
        test_windows = sorted(windows.get(test_pid, []), key=lambda w: w.window_start)
        ranking = None
        if personalization in ("metric", "stratified"):
            ranking = rank_patients(profiles[test_pid],
                                    [profiles[p] for p in train_pids], metric)
        results = []
        for seed in seeds:
            fr = FoldResult(test_pid, seed)
            try:
                if personalization == "none":
                    labels = np.array([w.label for w in train_windows], dtype=np.float64)
                    fit_windows = list(train_windows)
                    fr.provenance = "full-training-set"
                    fr.donor_ids = train_pids
                else:
                    subset = _build_subset(personalization, train_windows, ranking,
                                           stratum, derive_seed(seed, test_pid, "subset"))
                    fit_windows = subset.windows()
                    labels = subset.labels()
                    fr.provenance = subset.provenance
                    fr.donor_ids = subset.donor_ids
            except (NoPositiveInstancesError, InsufficientDonorsError) as exc:
                fr.skipped = True
                fr.skip_reason = str(exc)
                results.append(fr)
                continue
            _assert_no_leakage(fit_windows, test_pid,
                               "training subset / normalizer fit")
            fr.donor_distance = _mean_donor_distance(profiles, test_pid, fr.donor_ids,
                                                     report_metric)
            probs, binary = _fit_and_predict(
                model_family, fit_windows, labels, test_windows,
                seed=derive_seed(seed, test_pid, "train"), threshold=threshold,
                loss=loss, modalities=modalities, net_config=net_config,
                forest_config=forest_config, autoenc_config=autoenc_config)
            fr.predictions = [
                WeeklyPrediction(test_pid, w.target_week_start.isoformat(),
                                 float(p), int(b), int(w.label), seed, test_pid)
                for w, p, b in zip(test_windows, probs, binary)]
            results.append(fr)
        return results

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_results = list(pool.map(fold_task, fold_pids))
    else:
        all_results = [fold_task(pid) for pid in fold_pids]
    fold_results = [fr for group in all_results for fr in group]

    config_echo = {
        "model_family": model_family, "metric": metric,
        "personalization": personalization, "stratum": stratum, "loss": loss,
        "modalities": list(modalities) if modalities else None,
        "threshold": threshold, "seeds": seeds,
        "window": dataclasses.asdict(wc),
    }
    report = compute_report(fold_results, config_echo, seeds)
    return fold_results, report


def _mean_donor_distance(profiles, test_pid, donor_ids, metric):
    donors = [d for d in donor_ids if d != test_pid]
    if not donors:
        return None
    cohort = list(profiles.values())
    return float(np.mean([
        metric_distance(profiles[test_pid], profiles[d], metric, cohort)
        for d in donors]))


# ---------------------------------------------------------------------------
# Relapse Test Set
# ---------------------------------------------------------------------------

def build_relapse_test_set(fold_results, fraction: float = 0.2, seed: int = 0):
    """Restricted evaluation subset: relapse patients only, all their
    positive windows plus a per-patient sample of max(1, round(fraction * n))
    negative windows (weeks sampled once per patient, shared across seeds)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    positives = {}
    negatives = {}
    for fr in fold_results:
        for p in fr.predictions:
            target = positives if p.label == 1 else negatives
            target.setdefault(p.patient_id, set()).add(p.week_start)
    relapse_pids = sorted(positives)
    kept_weeks = {}
    for pid in relapse_pids:
        weeks = sorted(negatives.get(pid, ()))
        n = len(weeks)
        if n == 0:
            kept_weeks[pid] = set()
            continue
        k = min(n, max(1, int(np.floor(fraction * n + 0.5))))
        rng = derive_rng(seed, "relapse-test-set", pid)
        idx = rng.choice(n, size=k, replace=False)
        kept_weeks[pid] = {weeks[i] for i in idx}
    filtered = []
    for fr in fold_results:
        if fr.test_patient_id not in kept_weeks or fr.skipped:
            continue
        preds = [p for p in fr.predictions
                 if p.label == 1 or p.week_start in kept_weeks[p.patient_id]]
        filtered.append(dataclasses.replace(fr, predictions=preds))
    return filtered


# ---------------------------------------------------------------------------
# Pearson correlation and the SFS-distance analysis
# ---------------------------------------------------------------------------

def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc @ xc) * (yc @ yc))
    if denom == 0:
        raise ValueError("zero variance: correlation undefined")
    return float((xc @ yc) / denom)


def permutation_pvalue(x, y, n_permutations: int = 10000, seed: int = 0) -> float:
    """Two-sided permutation p-value for the Pearson correlation; always in
    [1/(P+1), 1]."""
    observed = abs(pearson_r(x, y))
    rng = derive_rng(seed, "permutation")
    y = np.asarray(y, dtype=np.float64)
    hits = 0
    for _ in range(n_permutations):
        r = pearson_r(x, rng.permutation(y))
        if abs(r) >= observed - 1e-12:
            hits += 1
    return (hits + 1) / (n_permutations + 1)


@dataclass(frozen=True)
class DistanceAnalysisRecord:
    patient_id: str
    stratum: str
    dist: float
    dist_rand: float
    f2: float
    f2_rand: float

    @property
    def delta_dist(self) -> float:
        return self.dist_rand - self.dist

    @property
    def delta_f2(self) -> float:
        return self.f2 - self.f2_rand


def _per_patient_outcomes(fold_results):
    """(mean F2, mean donor distance) per test patient across seeds."""
    f2s = {}
    dists = {}
    for fr in fold_results:
        if fr.skipped:
            continue
        f2s.setdefault(fr.test_patient_id, []).append(f2_score(fr.counts()))
        if fr.donor_distance is not None:
            dists.setdefault(fr.test_patient_id, []).append(fr.donor_distance)
    return ({pid: float(np.mean(v)) for pid, v in f2s.items()},
            {pid: float(np.mean(v)) for pid, v in dists.items()})


def sfs_distance_analysis(cohort: Cohort, model_family: str = "rpnet",
                          strata=("closest", "first_quartile", "median"),
                          seeds=None, metric: str = "sfs",
                          n_permutations: int = 10000, perm_seed: int = 0,
                          **run_kwargs):
    """Relate donor-distance changes to F2 changes against a random-subset
    baseline, pooled over relapse patients and strata.

    Returns (records, pearson r of (dist_rand - dist) vs (f2 - f2_rand),
    permutation p-value).
    """
    relapse_pids = sorted(pid for pid, events in cohort.relapses.items() if events)
    if len(relapse_pids) < 3:
        raise ValueError("distance analysis needs at least 3 relapse patients")
    seeds = list(seeds) if seeds is not None else list(range(3))
    base_results, _ = run_experiment(
        cohort, model_family, metric, seeds, personalization="random",
        test_patients=relapse_pids, distance_metric=metric, **run_kwargs)
    f2_rand, dist_rand = _per_patient_outcomes(base_results)
    records = []
    for stratum in strata:
        res, _ = run_experiment(
            cohort, model_family, metric, seeds, personalization="stratified",
            stratum=stratum, test_patients=relapse_pids, distance_metric=metric,
            **run_kwargs)
        f2s, dists = _per_patient_outcomes(res)
        for pid in relapse_pids:
            if pid in f2s and pid in f2_rand and pid in dists and pid in dist_rand:
                records.append(DistanceAnalysisRecord(
                    pid, stratum, dists[pid], dist_rand[pid], f2s[pid], f2_rand[pid]))
    x = [r.delta_dist for r in records]
    y = [r.delta_f2 for r in records]
    r = pearson_r(x, y)
    p = permutation_pvalue(x, y, n_permutations, perm_seed)
    return records, r, p
