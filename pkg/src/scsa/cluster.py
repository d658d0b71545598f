"""Intensity clustering: 1D k-means with k-means++ seeding and silhouette-based K selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ClusterModel",
    "SilhouetteReport",
    "kmeans_pp",
    "assign",
    "silhouette_samples",
    "silhouette_select",
]


@dataclass(frozen=True)
class ClusterModel:
    """Result of clustering. ``centers`` ascend, so label 0 is the darkest group."""

    k: int
    centers: np.ndarray
    labels: np.ndarray
    inertia: float = 0.0
    n_iter: int = 0
    sse_history: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class SilhouetteReport:
    candidates: list  # [(k, mean score or None)]
    selected_k: int
    degenerate: bool = False


def assign(values: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center; ties go to the lower index."""
    d = np.abs(np.asarray(values, dtype=float)[..., None] - np.asarray(centers, dtype=float))
    return np.argmin(d, axis=-1)


def _seed_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.shape[0])]]
    d2 = (x - centers[0]) ** 2
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        idx = rng.choice(x.shape[0], p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, (x - x[idx]) ** 2)
    return np.array(centers, dtype=float)


def _lloyd(x, centers, max_iter, tol):
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels = assign(x, centers)
        history.append(float(np.sum((x - centers[labels]) ** 2)))
        new = centers.copy()
        for c in range(centers.shape[0]):
            members = labels == c
            if members.any():
                new[c] = x[members].mean()
            else:
                # Reseed an empty cluster at the point farthest from its own center.
                far = np.argmax(np.abs(x - centers[labels]))
                new[c] = x[far]
        shift = float(np.max(np.abs(new - centers)))
        centers = new
        if shift < tol:
            break
    labels = assign(x, centers)
    history.append(float(np.sum((x - centers[labels]) ** 2)))
    return centers, labels, n_iter, history


def kmeans_pp(intensities, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6,
              n_init: int = 3) -> ClusterModel:
    """Cluster scalar intensities into ``k`` groups.

    ``n_init`` independent k-means++ seedings are drawn from one seeded
    generator and the run with the lowest within-cluster SSE is kept.
    ``labels`` has the same shape as ``intensities``.
    """
    arr = np.asarray(intensities, dtype=float)
    x = arr.ravel()
    if x.size == 0:
        raise ValueError("cannot cluster an empty input")
    if not np.all(np.isfinite(x)):
        raise ValueError("intensities contain non-finite values")
    k = int(k)
    n_distinct = np.unique(x).size
    if k < 1 or k > n_distinct:
        raise ValueError(f"k={k} must lie in [1, {n_distinct}] (distinct values)")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        init = _seed_centers(x, k, rng)
        if init.shape[0] < k:
            continue
        centers, labels, n_iter, history = _lloyd(x, init, max_iter, tol)
        if best is None or history[-1] < best[3][-1]:
            best = (centers, labels, n_iter, history)
    centers, labels, n_iter, history = best

    order = np.argsort(centers, kind="stable")
    centers = centers[order]
    labels = assign(x, centers)
    return ClusterModel(
        k=k,
        centers=centers,
        labels=labels.reshape(arr.shape),
        inertia=float(np.sum((x - centers[labels]) ** 2)),
        n_iter=n_iter,
        sse_history=tuple(history),
    )


def silhouette_samples(x, labels) -> np.ndarray:
    """Per-point silhouette with exact pairwise distances.

    A point alone in its cluster gets ``a = 0`` and hence a score of 1
    whenever another cluster exists at positive distance.
    """
    x = np.asarray(x, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    dist = np.abs(x[:, None] - x[None, :])
    onehot = labels[:, None] == uniq[None, :]
    sums = dist @ onehot
    counts = onehot.sum(axis=0).astype(float)
    own = np.searchsorted(uniq, labels)
    n = x.shape[0]
    own_count = counts[own]
    a = np.where(own_count > 1, sums[np.arange(n), own] / np.maximum(own_count - 1, 1), 0.0)
    means = sums / counts[None, :]
    means[np.arange(n), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    return np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)


def silhouette_select(intensities, k_min: int = 2, k_max: int = 6, seed: int = 0,
                      sample_size: int = 2000) -> SilhouetteReport:
    """Pick the cluster count with the highest mean silhouette (ties: smaller k).

    Scores are computed on a seeded uniform subsample of at most
    ``sample_size`` points; clustering itself uses all points.  Values of
    ``k`` above the number of distinct intensities are skipped.
    """
    if not (2 <= k_min <= k_max):
        raise ValueError(f"need 2 <= k_min <= k_max, got {k_min}, {k_max}")
    if sample_size < 2:
        raise ValueError("sample_size must be at least 2")
    x = np.asarray(intensities, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot cluster an empty input")
    n_distinct = np.unique(x).size
    if n_distinct < 2:
        return SilhouetteReport(candidates=[(k, None) for k in range(k_min, k_max + 1)],
                                selected_k=k_min, degenerate=True)

    rng = np.random.default_rng([seed, 0x5157])
    if x.size > sample_size:
        sample = np.sort(rng.choice(x.size, size=sample_size, replace=False))
    else:
        sample = np.arange(x.size)

    candidates = []
    best_k, best_score = None, -math.inf
    for k in range(k_min, k_max + 1):
        if k > n_distinct:
            candidates.append((k, None))
            continue
        model = kmeans_pp(x, k, seed=seed)
        sub_labels = model.labels[sample]
        if np.unique(sub_labels).size < 2:
            candidates.append((k, None))
            continue
        score = float(np.mean(silhouette_samples(x[sample], sub_labels)))
        candidates.append((k, score))
        if score > best_score:
            best_k, best_score = k, score
    if best_k is None:
        return SilhouetteReport(candidates=candidates, selected_k=k_min, degenerate=True)
    return SilhouetteReport(candidates=candidates, selected_k=best_k)
