from .autoencoder import (AnomalyDetector, Autoencoder, AutoencoderConfig,
                          anomaly_predict_window, fit_anomaly_detector,
                          mahalanobis_distance, train_autoencoder)
from .forest import (Forest, ForestConfig, load_forest, rf_predict, save_forest,
                     train_rf, window_features)
from .fusion import FUSION_SCHEMES, fuse_probabilities
from .rpnet import (RelapsePredNet, RelapsePredNetConfig, load_relapseprednet,
                    predict_window, save_relapseprednet, train_relapseprednet)

__all__ = [
    "AnomalyDetector", "Autoencoder", "AutoencoderConfig", "anomaly_predict_window",
    "fit_anomaly_detector", "mahalanobis_distance", "train_autoencoder", "Forest",
    "ForestConfig", "load_forest", "rf_predict", "save_forest", "train_rf",
    "window_features", "FUSION_SCHEMES", "fuse_probabilities", "RelapsePredNet",
    "RelapsePredNetConfig", "load_relapseprednet", "predict_window",
    "save_relapseprednet", "train_relapseprednet",
]
