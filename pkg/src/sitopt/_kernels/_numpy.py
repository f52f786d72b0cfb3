"""Pure-numpy implementations of the hot numeric kernels.

These define the semantics; the numba backend mirrors them loop-for-loop.
Label conventions: cluster ids are assigned in order of first appearance
when scanning points by index, so both backends produce identical labels
whenever they produce identical partitions.
"""

from __future__ import annotations

import numpy as np


def pairwise_sq_dists(X):
    diff = X[:, None, :] - X[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_lloyd(X, centers, max_iter=100, tol=1e-12):
    """Lloyd iteration from the given initial centers.

    Empty clusters keep their previous center. Returns (labels, centers,
    inertia) with inertia = sum of squared distances to assigned centers.
    """
    X = np.asarray(X, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64, copy=True)
    n = X.shape[0]
    k = centers.shape[0]
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = X[members].mean(axis=0)
        shift = ((new_centers - centers) ** 2).sum()
        centers = new_centers
        if shift <= tol:
            break
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    return labels.astype(np.int64), centers, inertia


def dbscan_labels(X, eps, min_samples):
    """Density-based clustering; -1 marks noise.

    A point is core when at least ``min_samples`` points (itself included)
    lie within ``eps``; clusters are the density-connected components of
    core points plus the border points they reach first.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    adj = pairwise_sq_dists(X) <= eps * eps
    core = adj.sum(axis=1) >= min_samples
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        frontier = np.zeros(n, dtype=bool)
        frontier[i] = True
        while frontier.any():
            reached = adj[frontier].any(axis=0) & (labels == -1)
            labels[reached] = cluster
            frontier = reached & core
        cluster += 1
    return labels


def optics_graph(X, min_samples):
    """Reachability graph: (ordering, reachability, core_distance).

    ``reachability`` and ``core_distance`` are indexed by point; the first
    point of every connected component keeps reachability inf. Ties in the
    next-point selection break toward the lower point index.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    dist = np.sqrt(pairwise_sq_dists(X))
    if n >= min_samples:
        core = np.partition(dist, min_samples - 1, axis=1)[:, min_samples - 1]
    else:
        core = np.full(n, np.inf)
    reach = np.full(n, np.inf)
    processed = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    for pos in range(n):
        candidates = np.where(processed, np.inf, reach)
        p = int(np.argmin(candidates))
        if not np.isfinite(candidates[p]):
            p = int(np.argmin(processed))  # first unprocessed index
        order[pos] = p
        processed[p] = True
        if np.isfinite(core[p]):
            new_reach = np.maximum(core[p], dist[p])
            improve = ~processed & (new_reach < reach)
            reach[improve] = new_reach[improve]
    return order, reach, core


def advance_vehicles(
    pos,
    speed,
    cruise,
    vmax,
    platoon_id,
    lane,
    alive,
    n_lanes,
    dt,
    accel,
    decel,
    min_gap,
    platoon_gap,
    gap_kp,
):
    """One car-following step, in place. Front-to-back per lane.

    Platoon followers directly behind a platoon mate steer toward the fixed
    platoon gap; everyone else accelerates toward its cruise speed. A running
    minimum keeps same-lane positions separated by at least ``min_gap``.
    """
    for ln in range(1, n_lanes + 1):
        sel = np.flatnonzero(alive & (lane == ln))
        if sel.size == 0:
            continue
        idx = sel[np.argsort(-pos[sel], kind="stable")]
        p = pos[idx]
        v = speed[idx]
        target = cruise[idx].copy()
        if idx.size > 1:
            follows = (platoon_id[idx][1:] >= 0) & (
                platoon_id[idx][1:] == platoon_id[idx][:-1]
            )
            gap = p[:-1] - p[1:]
            platoon_target = v[:-1] + gap_kp * (gap - platoon_gap)
            target[1:] = np.where(follows, platoon_target, target[1:])
        v_new = np.clip(target, v - decel * dt, v + accel * dt)
        v_new = np.clip(v_new, 0.0, vmax[idx])
        p_unc = p + v_new * dt
        shift = np.arange(idx.size) * min_gap
        p_new = np.minimum.accumulate(p_unc + shift) - shift
        pos[idx] = p_new
        speed[idx] = (p_new - p) / dt
