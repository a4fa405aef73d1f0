"""Mobile-sensing relapse prediction benchmark.

A from-scratch bi-LSTM relapse predictor with patient-similarity
personalization, anomaly-detection and random-forest baselines, late fusion,
and a leave-one-patient-out sequential evaluation harness, plus a seeded
synthetic cohort generator for desk-scale experiments.
"""

__version__ = "0.1.0"

from . import data, diagnostics, evaluation, nn, personalization, synth
from .data import (Cohort, DayVector, Normalizer, ObservationWindow, PatientProfile,
                   RelapseEvent, WindowConfig, apply_normalizer, build_day_vectors,
                   fit_normalizer, impute_missing, ingest_cohort, label_week,
                   make_windows)
from .evaluation import (ConfusionCounts, FoldResult, MetricsReport,
                         build_relapse_test_set, f2_score, lopo_folds,
                         per_patient_f2, run_experiment, sfs_distance_analysis)
from .models import (AutoencoderConfig, ForestConfig, RelapsePredNetConfig,
                     fuse_probabilities, predict_window, train_autoencoder,
                     train_relapseprednet, train_rf)
from .personalization import (SimilarityRanking, TrainingSubset,
                              build_personalized_subset, build_random_subset,
                              combined_metric, distance_stratified_subset,
                              metric_distance, rank_patients)
from .synth import CohortSpec, generate_cohort
