"""Separability diagnostics on input features and learned embeddings."""

import numpy as np

from .data import fit_normalizer, apply_normalizer


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def class_distance_distributions(windows):
    """Euclidean distances between min-max-normalized window time-means.

    Returns (intra, inter): all pairwise distances within the non-relapse
    class, and all non-relapse-to-relapse pairs.
    """
    windows = list(windows)
    rows = np.stack([w.time_mean() for w in windows])
    labels = np.array([w.label for w in windows])
    if not (labels == 0).any() or not (labels == 1).any():
        raise ValueError("both classes must be present")
    norm = fit_normalizer(rows, "distance-analysis")
    rows = apply_normalizer(norm, rows)
    nonrel = rows[labels == 0]
    rel = rows[labels == 1]
    n = nonrel.shape[0]
    intra = []
    for i in range(n):
        for j in range(i + 1, n):
            intra.append(float(np.linalg.norm(nonrel[i] - nonrel[j])))
    inter = []
    for a in nonrel:
        for b in rel:
            inter.append(float(np.linalg.norm(a - b)))
    return np.array(intra), np.array(inter)


def silhouette_coefficient(points, labels) -> float:
    """Mean silhouette with Euclidean distance.  Singleton-cluster points
    score 0, as do points with zero intra- and inter-cluster distance."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    dist = _pairwise_distances(points)
    n = points.shape[0]
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        n_own = own.sum()
        if n_own == 1:
            continue  # singleton: score 0
        a = dist[i, own].sum() / (n_own - 1)
        b = min(dist[i, labels == other].mean() for other in uniq if other != labels[i])
        m = max(a, b)
        scores[i] = 0.0 if m == 0 else (b - a) / m
    return float(scores.mean())


def separability_index(points, labels) -> float:
    """Fraction of points whose nearest neighbor (excluding self, ties broken
    by lowest index) carries the same label."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = points.shape[0]
    if n < 2:
        raise ValueError("separability index needs at least 2 points")
    dist = _pairwise_distances(points)
    np.fill_diagonal(dist, np.inf)
    nearest = dist.argmin(axis=1)  # argmin takes the lowest index on ties
    return float(np.mean(labels[nearest] == labels))


def export_embeddings(model, windows):
    """Final-hidden-layer activations (eval mode) for each window.

    Returns a list of (window id, embedding vector, label) suitable for CSV
    export and external t-SNE plotting.
    """
    windows = list(windows)
    if not windows:
        return []
    emb = model.embed_batch(windows)
    out = []
    for w, e in zip(windows, emb):
        wid = f"{w.patient_id}:{w.target_week_start.isoformat()}"
        out.append((wid, np.asarray(e, dtype=np.float64), int(w.label)))
    return out
