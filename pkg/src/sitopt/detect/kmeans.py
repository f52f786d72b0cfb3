"""K-means clustering with k-means++ seeding and gap-statistic k selection.

The gap statistic compares the log within-cluster dispersion of the data
against B reference datasets drawn uniformly over the data's bounding box
(Tibshirani et al. 2001). The smallest k whose gap is within one standard
error of the next k's gap is chosen.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import EmptyInputError, KExceedsPointsError
from .outcome import ClusteringOutcome

GAP_REFERENCE_SETS = 10
_RESTARTS = 4


def _kmeans_pp_centers(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            pick = rng.integers(n)
        else:
            pick = rng.choice(n, p=closest / total)
        centers[j] = X[pick]
        closest = np.minimum(closest, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _run_kmeans(X, k, rng):
    """Best of a few k-means++ restarts; returns (labels, inertia)."""
    best_labels, best_inertia = None, np.inf
    for _ in range(_RESTARTS):
        centers = _kmeans_pp_centers(X, k, rng)
        labels, _, inertia = _kernels.kmeans_lloyd(X, centers)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def _pick_k_by_gap(X, k_min, k_max, rng):
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    ks = list(range(k_min, k_max + 1))
    gaps = np.empty(len(ks))
    errs = np.empty(len(ks))
    for i, k in enumerate(ks):
        _, inertia = _run_kmeans(X, k, rng)
        ref_logs = np.empty(GAP_REFERENCE_SETS)
        for b in range(GAP_REFERENCE_SETS):
            ref = lo + rng.random(X.shape) * span
            _, ref_inertia = _run_kmeans(ref, k, rng)
            ref_logs[b] = np.log(max(ref_inertia, 1e-300))
        gaps[i] = ref_logs.mean() - np.log(max(inertia, 1e-300))
        errs[i] = ref_logs.std() * np.sqrt(1.0 + 1.0 / GAP_REFERENCE_SETS)
    for i in range(len(ks) - 1):
        if gaps[i] >= gaps[i + 1] - errs[i + 1]:
            return ks[i]
    return ks[-1]


def kmeans_cluster(points, k=None, k_range=None, seed=0) -> ClusteringOutcome:
    """Cluster with fixed ``k`` or pick k in ``k_range`` by the gap statistic.

    Labels are cluster indices, never noise. Deterministic for a given seed.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise EmptyInputError("no points to cluster")
    if (k is None) == (k_range is None):
        raise ValueError("give exactly one of k or k_range")
    rng = np.random.default_rng(seed)
    if k is None:
        k_min, k_max = k_range
        k_max = min(k_max, X.shape[0])
        k_min = min(k_min, k_max)
        k = _pick_k_by_gap(X, k_min, k_max, rng)
        rng = np.random.default_rng(seed)  # final run independent of search order
    if k > X.shape[0]:
        raise KExceedsPointsError(f"k={k} exceeds {X.shape[0]} points")
    labels, _ = _run_kmeans(X, k, rng)
    return ClusteringOutcome(labels=canonical_labels(labels), id_mapping={})


def canonical_labels(labels):
    """Renumber non-noise labels by order of first appearance."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full(labels.shape, -1, dtype=np.int64)
    seen = {}
    for i, lab in enumerate(labels):
        if lab < 0:
            continue
        if lab not in seen:
            seen[lab] = len(seen)
        out[i] = seen[lab]
    return out
