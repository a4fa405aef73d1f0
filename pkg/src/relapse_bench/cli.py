"""Config-driven experiment runner.

Subcommands: synth, validate, evaluate, fuse, diagnose, report.
Exit status: 0 success, 1 usage error, 2 data validation error,
3 runtime/numeric error.  `RELAPSE_BENCH_THREADS` caps fold workers.
"""

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import (DataValidationError, MODALITIES, WindowConfig, ingest_cohort)
from .diagnostics import (class_distance_distributions, export_embeddings,
                          separability_index, silhouette_coefficient)
from .evaluation import (FoldResult, WeeklyPrediction, build_relapse_test_set,
                         compute_report, run_experiment, sfs_distance_analysis)
from .models.fusion import FUSION_SCHEMES, fuse_probabilities
from .models.rpnet import RelapsePredNetConfig, train_relapseprednet
from .models.autoencoder import AutoencoderConfig
from .models.forest import ForestConfig
from .personalization import (build_personalized_subset, build_random_subset,
                              rank_patients)
from .synth import CohortSpec, generate_cohort
from .util import derive_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

PREDICTIONS_HEADER = ["patient_id", "week_start", "probability", "prediction",
                      "label", "seed", "fold"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Config file + flag plumbing
# ---------------------------------------------------------------------------

def load_config_file(path) -> dict:
    """INI-style `key = value` under [section] headers, flattened to
    section.key -> string."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError(f"config file not found: {path}")
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value
    return flat


def _setting(args, config, flag_name, config_key, default=None, cast=str):
    value = getattr(args, flag_name, None) if flag_name else None
    if value is not None:
        return value
    if config_key in config:
        raw = config[config_key]
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _parse_seeds(text: str):
    """Either a count ("10" -> seeds 0..9) or an explicit comma list."""
    text = text.strip()
    if "," in text:
        return [int(p) for p in text.split(",") if p.strip() != ""]
    n = int(text)
    if n <= 0:
        raise UsageError("--seeds must be positive")
    return list(range(n))


def _workers(args) -> int:
    requested = getattr(args, "workers", None) or 1
    cap = os.environ.get("RELAPSE_BENCH_THREADS")
    if cap:
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"RELAPSE_BENCH_THREADS is not an integer: {cap!r}")
    return requested


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, config: dict, artifacts) -> Path:
    manifest = {
        "code_version": __version__,
        "config_digest": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "config": config,
        "artifacts": [{"file": p.name, "sha256": sha256_file(p)}
                      for p in sorted(artifacts)],
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------------------
# Cohort loading shared by evaluate/diagnose/validate
# ---------------------------------------------------------------------------

def _cohort_paths(data_dir: Path):
    return (data_dir / "patients.csv", data_dir / "sensing.csv",
            data_dir / "relapses.csv")


def _spec_from_args(args, config) -> CohortSpec:
    return CohortSpec(
        n_patients=_setting(args, config, "n_patients", "data.n_patients", 40, int),
        days_per_patient=_setting(args, config, "days", "data.days_per_patient", 182, int),
        relapse_fraction=_setting(args, config, "relapse_fraction",
                                  "data.relapse_fraction", 0.3, float),
        prodrome_days=_setting(args, config, "prodrome_days", "data.prodrome_days", 30, int),
        trait_effect=_setting(args, config, "trait_effect", "data.trait_effect", 1.5, float),
        drift_effect=_setting(args, config, "drift_effect", "data.drift_effect", 1.5, float),
        missing_rate=_setting(args, config, "missing_rate", "data.missing_rate", 0.05, float),
        seed=_setting(args, config, "data_seed", "data.seed", 0, int))


def _load_cohort(args, config, workdir: Path):
    data_dir = _setting(args, config, "data_dir", "data.dir")
    source = _setting(args, config, None, "data.source", None)
    if data_dir is None and source == "csv":
        data_dir = config.get("data.path", ".")
    if data_dir is not None:
        return ingest_cohort(*_cohort_paths(Path(data_dir)))
    # synthetic source: generate into the run directory, then ingest
    synth_dir = workdir / "synth-data"
    paths = generate_cohort(_spec_from_args(args, config)).write(synth_dir)
    return ingest_cohort(paths["patients.csv"], paths["sensing.csv"],
                         paths["relapses.csv"])


def _window_config(args, config) -> WindowConfig:
    return WindowConfig(
        m_days=_setting(args, config, "window_days", "window.m_days", 28, int),
        step_days=_setting(args, config, "step_days", "window.step_days", 7, int),
        horizon_days=_setting(args, config, "horizon_days", "window.horizon_days", 30, int),
        missing_day_fraction_limit=_setting(
            args, config, "missing_limit", "window.missing_day_fraction_limit", 0.5, float),
        post_relapse_exclusion_days=_setting(
            args, config, "post_relapse_exclusion",
            "window.post_relapse_exclusion_days", 0, int))


def _net_config(args, config, loss, modalities, threshold) -> RelapsePredNetConfig:
    return RelapsePredNetConfig(
        hidden_dim=_setting(args, config, "hidden_dim", "model.hidden_dim", 128, int),
        fc1_dim=_setting(args, config, "fc1_dim", "model.fc1_dim", 128, int),
        fc2_dim=_setting(args, config, "fc2_dim", "model.fc2_dim", 64, int),
        dropout_rate=_setting(args, config, "dropout", "model.dropout_rate", 0.2, float),
        loss=loss,
        learning_rate=_setting(args, config, "learning_rate", "model.learning_rate",
                               1e-5, float),
        batch_size=_setting(args, config, "batch_size", "model.batch_size", 32, int),
        max_epochs=_setting(args, config, "max_epochs", "model.max_epochs", 100, int),
        patience=_setting(args, config, "patience", "model.patience", 10, int),
        modalities=modalities, threshold=threshold)


def _modalities(args, config):
    raw = _setting(args, config, "modalities", "model.modalities")
    if raw is None or raw == "all":
        return None
    names = tuple(m.strip() for m in raw.split(",") if m.strip())
    for m in names:
        if m not in MODALITIES:
            raise UsageError(f"unknown modality {m!r}; choose from {MODALITIES}")
    if not names:
        raise UsageError("--modalities must name at least one modality")
    return names


# ---------------------------------------------------------------------------
# predictions.csv helpers
# ---------------------------------------------------------------------------

def write_predictions_csv(path: Path, fold_results) -> None:
    rows = []
    for fr in fold_results:
        for p in fr.predictions:
            rows.append([p.patient_id, p.week_start, f"{p.probability:.17g}",
                         str(p.prediction), str(p.label), str(p.seed), p.fold])
    rows.sort(key=lambda r: (int(r[5]), r[6], r[0], r[1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTIONS_HEADER)
        writer.writerows(rows)


def read_predictions_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or rows[0] != PREDICTIONS_HEADER:
        raise DataValidationError(f"bad predictions header in {path}", str(path), 1)
    out = []
    for row in rows[1:]:
        out.append(WeeklyPrediction(
            patient_id=row[0], week_start=row[1], probability=float(row[2]),
            prediction=int(row[3]), label=int(row[4]), seed=int(row[5]), fold=row[6]))
    return out


def fold_results_from_predictions(predictions) -> list:
    grouped = {}
    for p in predictions:
        grouped.setdefault((p.fold, p.seed), []).append(p)
    results = []
    for (fold, seed), preds in sorted(grouped.items()):
        preds.sort(key=lambda p: (p.patient_id, p.week_start))
        results.append(FoldResult(test_patient_id=fold, seed=seed, predictions=preds))
    return results


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    spec = _spec_from_args(args, config)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out_dir}: {exc}")
    paths = generate_cohort(spec).write(out_dir)
    write_manifest(out_dir, dataclasses.asdict(spec), paths.values())
    print(f"wrote {', '.join(sorted(p.name for p in paths.values()))} to {out_dir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cohort = ingest_cohort(*_cohort_paths(Path(args.data_dir)))
    info = cohort.summary()
    print(f"patients: {info['patients']}")
    print(f"relapse patients: {info['relapse_patients']}")
    print(f"relapse instances: {info['relapse_instances']}")
    print(f"hourly coverage: {info['coverage']:.3f}")
    return EXIT_OK


def _evaluate_settings(args, config):
    loss_flag = _setting(args, config, "loss", "model.loss", "bce")
    if loss_flag not in ("bce", "f2"):
        raise UsageError(f"--loss must be bce or f2, got {loss_flag!r}")
    family = _setting(args, config, "model", "model.family", "rpnet")
    if family not in ("rpnet", "autoenc", "rf"):
        raise UsageError(f"--model must be rpnet, autoenc or rf, got {family!r}")
    if loss_flag == "f2" and family != "rpnet":
        raise UsageError("--loss f2 applies only to --model rpnet")
    personalization = _setting(args, config, "personalization",
                               "personalization.mode", "metric")
    if personalization not in ("none", "random", "metric"):
        raise UsageError("--personalization must be none, random or metric")
    metric = _setting(args, config, "metric", "personalization.metric", "sfs")
    if metric not in ("age", "bprs", "sfs", "cdss", "gpts", "combined"):
        raise UsageError(f"unknown personalization metric {metric!r}")
    return family, personalization, metric, ("soft_f2" if loss_flag == "f2" else "bce")


def cmd_evaluate(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    family, personalization, metric, loss = _evaluate_settings(args, config)
    modalities = _modalities(args, config)
    threshold = _setting(args, config, "threshold", "model.threshold", 0.5, float)
    seeds_text = _setting(args, config, "seeds", "run.seeds", "10")
    seeds = _parse_seeds(str(seeds_text))
    root_seed = _setting(args, config, "root_seed", "run.root_seed", 0, int)
    seeds = [derive_seed(root_seed, "run", s) if root_seed else s for s in seeds]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cohort = _load_cohort(args, config, out_dir)
    wc = _window_config(args, config)
    net = _net_config(args, config, loss, modalities, threshold)
    forest = ForestConfig(
        n_trees=_setting(args, config, "trees", "model.n_trees", 11, int),
        modalities=modalities, threshold=threshold)
    autoenc_sizes = (net.input_dim,
                     _setting(args, config, "autoenc_hidden", "model.autoenc_hidden", 64, int),
                     _setting(args, config, "autoenc_embed", "model.autoenc_embed", 16, int))
    autoenc = AutoencoderConfig(
        layer_sizes=autoenc_sizes,
        learning_rate=_setting(args, config, "autoenc_lr", "model.autoenc_lr", 1e-3, float),
        epochs=_setting(args, config, "autoenc_epochs", "model.autoenc_epochs", 200, int),
        modalities=modalities)

    fold_results, report = run_experiment(
        cohort, family, metric, seeds, personalization=personalization, loss=loss,
        modalities=modalities, window_config=wc, net_config=net,
        forest_config=forest, autoenc_config=autoenc, threshold=threshold,
        workers=_workers(args))

    pred_path = out_dir / "predictions.csv"
    write_predictions_csv(pred_path, fold_results)
    payload = report.to_dict()
    if args.relapse_test_set:
        fraction = _setting(args, config, "rts_fraction", "run.rts_fraction", 0.2, float)
        filtered = build_relapse_test_set(fold_results, fraction, root_seed)
        rts_report = compute_report(filtered, payload["config"], seeds)
        payload["relapse_test_set"] = rts_report.to_dict()["pooled"]
        payload["relapse_test_set"]["fraction"] = fraction
    metrics_path = out_dir / "metrics.json"
    _write_json(metrics_path, payload)
    write_manifest(out_dir, payload["config"], [pred_path, metrics_path])
    print(f"F2 (mean over {len(seeds)} seeds): {report.f2:.4f}  "
          f"precision: {report.precision:.4f}  recall: {report.recall:.4f}")
    if args.relapse_test_set:
        print(f"Relapse Test Set F2: {payload['relapse_test_set']['f2_mean']:.4f}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    if args.scheme not in FUSION_SCHEMES:
        raise UsageError(f"--scheme must be one of {FUSION_SCHEMES}")
    preds_a = read_predictions_csv(args.predictions_a)
    preds_b = read_predictions_csv(args.predictions_b)
    key = lambda p: (p.patient_id, p.week_start, p.seed)
    map_a = {key(p): p for p in preds_a}
    map_b = {key(p): p for p in preds_b}
    if set(map_a) != set(map_b):
        diff = sorted(set(map_a) ^ set(map_b))[0]
        raise DataValidationError(
            f"prediction files cover different (patient, week, seed) keys; "
            f"first divergence: {diff}")
    threshold = args.threshold
    fused = []
    for k in sorted(map_a):
        a, b = map_a[k], map_b[k]
        if a.label != b.label:
            raise DataValidationError(f"label mismatch at {k}")
        p = fuse_probabilities(a.probability, b.probability, args.scheme)
        fused.append(dataclasses.replace(a, probability=float(p),
                                         prediction=int(p > threshold)))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = fold_results_from_predictions(fused)
    seeds = sorted({p.seed for p in fused})
    report = compute_report(results, {"fusion_scheme": args.scheme,
                                      "threshold": threshold,
                                      "inputs": [str(args.predictions_a),
                                                 str(args.predictions_b)]}, seeds)
    pred_path = out_dir / "predictions.csv"
    write_predictions_csv(pred_path, results)
    metrics_path = out_dir / "metrics.json"
    _write_json(metrics_path, report.to_dict())
    write_manifest(out_dir, report.config, [pred_path, metrics_path])
    print(f"{args.scheme} fusion F2 (mean over seeds): {report.f2:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    predictions = read_predictions_csv(args.predictions)
    results = fold_results_from_predictions(predictions)
    seeds = sorted({p.seed for p in predictions})
    report = compute_report(results, {"regenerated_from": str(args.predictions)}, seeds)
    _write_json(Path(args.out), report.to_dict())
    print(f"F2 (mean over {len(seeds)} seeds): {report.f2:.4f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    metric = _setting(args, config, "metric", "personalization.metric", "sfs")
    modalities = _modalities(args, config)
    seeds = _parse_seeds(str(_setting(args, config, "seeds", "run.seeds", "2")))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cohort = _load_cohort(args, config, out_dir)
    wc = _window_config(args, config)
    net = _net_config(args, config, "bce", modalities, 0.5)

    from .data import build_day_vectors, cohort_reference_stats, impute_missing, make_windows
    day_vecs = build_day_vectors(cohort)
    pids = sorted(day_vecs)
    test_pid = args.patient
    windows_all, _ = make_windows(
        impute_missing(day_vecs, cohort_reference_stats(day_vecs)),
        cohort.relapses, wc)
    if test_pid is None:
        counts = {pid: sum(w.label for w in ws) for pid, ws in windows_all.items()}
        test_pid = max(sorted(counts), key=lambda p: counts[p])
    if test_pid not in day_vecs:
        raise UsageError(f"unknown patient {test_pid!r}")

    train_pids = [p for p in pids if p != test_pid]
    ref = cohort_reference_stats({p: day_vecs[p] for p in train_pids})
    windows, _ = make_windows(impute_missing(day_vecs, ref), cohort.relapses, wc)
    train_windows = [w for p in train_pids for w in windows[p]]
    test_windows = sorted(windows.get(test_pid, []), key=lambda w: w.window_start)
    ranking = rank_patients(cohort.patients[test_pid],
                            [cohort.patients[p] for p in train_pids], metric)
    subset_seed = derive_seed(args.seed, test_pid, "diagnose")
    subsets = {"personalized": build_personalized_subset(train_windows, ranking, subset_seed),
               "random": build_random_subset(train_windows, subset_seed)}

    dist_rows = []
    distance_summary = {}
    for mode, subset in subsets.items():
        intra, inter = class_distance_distributions(subset.windows())
        for d in intra:
            dist_rows.append([mode, "intra", f"{d:.17g}"])
        for d in inter:
            dist_rows.append([mode, "inter", f"{d:.17g}"])
        distance_summary[mode] = {
            "intra_mean": float(intra.mean()), "intra_std": float(intra.std()),
            "intra_count": int(intra.size),
            "inter_mean": float(inter.mean()), "inter_std": float(inter.std()),
            "inter_count": int(inter.size),
            "separation": float(inter.mean() - intra.mean()),
        }
    dist_path = out_dir / "distances.csv"
    with open(dist_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "kind", "distance"])
        writer.writerows(dist_rows)

    model = train_relapseprednet(subsets["personalized"], net,
                                 seed=derive_seed(args.seed, test_pid, "train"))
    exported = export_embeddings(model, test_windows)
    emb_path = out_dir / "embeddings.csv"
    with open(emb_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_id"] + [f"e{i}" for i in range(net.fc2_dim)] + ["label"])
        for wid, emb, label in exported:
            writer.writerow([wid] + [f"{v:.17g}" for v in emb] + [str(label)])

    embedding_metrics = {"silhouette": None, "separability_index": None, "note": ""}
    labels = [label for _, _, label in exported]
    if len(set(labels)) >= 2:
        points = np.stack([emb for _, emb, _ in exported])
        embedding_metrics["silhouette"] = silhouette_coefficient(points, labels)
        embedding_metrics["separability_index"] = separability_index(points, labels)
    else:
        embedding_metrics["note"] = "test windows contain a single class"

    diagnostics = {
        "test_patient": test_pid,
        "metric": metric,
        "distance_distributions": distance_summary,
        "embeddings": embedding_metrics,
    }
    if not args.skip_sfs_analysis:
        records, r, p = sfs_distance_analysis(
            cohort, "rpnet", seeds=seeds, metric=metric, window_config=wc,
            net_config=net, workers=_workers(args))
        diagnostics["sfs_distance_analysis"] = {
            "pearson_r": r, "permutation_p": p,
            "records": [{"patient_id": rec.patient_id, "stratum": rec.stratum,
                         "dist": rec.dist, "dist_rand": rec.dist_rand,
                         "f2": rec.f2, "f2_rand": rec.f2_rand,
                         "delta_dist": rec.delta_dist, "delta_f2": rec.delta_f2}
                        for rec in records],
        }
    diag_path = out_dir / "diagnostics.json"
    _write_json(diag_path, diagnostics)
    write_manifest(out_dir, {"command": "diagnose", "patient": test_pid,
                             "metric": metric},
                   [dist_path, emb_path, diag_path])
    print(f"diagnostics for patient {test_pid} written to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="relapse-bench",
                     description="Relapse prediction benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_synth_flags(p):
        p.add_argument("--n-patients", dest="n_patients", type=int)
        p.add_argument("--days", type=int)
        p.add_argument("--relapse-fraction", dest="relapse_fraction", type=float)
        p.add_argument("--prodrome-days", dest="prodrome_days", type=int)
        p.add_argument("--trait-effect", dest="trait_effect", type=float)
        p.add_argument("--drift-effect", dest="drift_effect", type=float)
        p.add_argument("--missing-rate", dest="missing_rate", type=float)
        p.add_argument("--data-seed", dest="data_seed", type=int)

    def add_window_flags(p):
        p.add_argument("--window-days", dest="window_days", type=int)
        p.add_argument("--step-days", dest="step_days", type=int)
        p.add_argument("--horizon-days", dest="horizon_days", type=int)
        p.add_argument("--missing-limit", dest="missing_limit", type=float)
        p.add_argument("--post-relapse-exclusion", dest="post_relapse_exclusion", type=int)

    def add_model_flags(p):
        p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
        p.add_argument("--fc1-dim", dest="fc1_dim", type=int)
        p.add_argument("--fc2-dim", dest="fc2_dim", type=int)
        p.add_argument("--dropout", type=float)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--max-epochs", dest="max_epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--trees", type=int)
        p.add_argument("--autoenc-hidden", dest="autoenc_hidden", type=int)
        p.add_argument("--autoenc-embed", dest="autoenc_embed", type=int)
        p.add_argument("--autoenc-epochs", dest="autoenc_epochs", type=int)
        p.add_argument("--autoenc-lr", dest="autoenc_lr", type=float)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    add_synth_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="validate cohort CSVs and print a summary")
    p.add_argument("data_dir", help="directory holding patients/sensing/relapses CSVs")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evaluate", help="run a LOPO experiment")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--model", choices=["rpnet", "autoenc", "rf"])
    p.add_argument("--personalization", choices=["none", "random", "metric"])
    p.add_argument("--metric", choices=["age", "bprs", "sfs", "cdss", "gpts", "combined"])
    p.add_argument("--loss", choices=["bce", "f2"])
    p.add_argument("--modalities", help="comma list, e.g. conversation,volume")
    p.add_argument("--seeds", help="count (N -> 0..N-1) or comma list")
    p.add_argument("--root-seed", dest="root_seed", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--relapse-test-set", action="store_true")
    p.add_argument("--rts-fraction", dest="rts_fraction", type=float)
    p.add_argument("--workers", type=int, default=1)
    add_synth_flags(p)
    add_window_flags(p)
    add_model_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fuse", help="late-fuse two prediction files")
    p.add_argument("predictions_a")
    p.add_argument("predictions_b")
    p.add_argument("--scheme", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("diagnose", help="distance, embedding and SFS-distance diagnostics")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--patient")
    p.add_argument("--metric", choices=["age", "bprs", "sfs", "cdss", "gpts", "combined"])
    p.add_argument("--modalities")
    p.add_argument("--seeds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-sfs-analysis", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    add_synth_flags(p)
    add_window_flags(p)
    add_model_flags(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("report", help="recompute metrics.json from predictions.csv")
    p.add_argument("predictions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # runtime/numeric failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
