"""Numba-compiled twins of the numpy kernels.

Same semantics and label conventions as ``_numpy``; see that module for the
reference definitions.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sq_dist_matrix(X):
    n, d = X.shape
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                acc += diff * diff
            out[i, j] = acc
            out[j, i] = acc
    return out


@njit(cache=True)
def _kmeans_lloyd_impl(X, centers, max_iter, tol):
    n, d = X.shape
    k = centers.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    counts = np.zeros(k, dtype=np.int64)
    sums = np.zeros((k, d), dtype=np.float64)
    for _ in range(max_iter):
        counts[:] = 0
        sums[:] = 0.0
        for i in range(n):
            best = 0
            best_d = np.inf
            for j in range(k):
                acc = 0.0
                for c in range(d):
                    diff = X[i, c] - centers[j, c]
                    acc += diff * diff
                if acc < best_d:
                    best_d = acc
                    best = j
            labels[i] = best
            counts[best] += 1
            for c in range(d):
                sums[best, c] += X[i, c]
        shift = 0.0
        for j in range(k):
            if counts[j] > 0:
                for c in range(d):
                    new = sums[j, c] / counts[j]
                    diff = new - centers[j, c]
                    shift += diff * diff
                    centers[j, c] = new
        if shift <= tol:
            break
    inertia = 0.0
    for i in range(n):
        best = 0
        best_d = np.inf
        for j in range(k):
            acc = 0.0
            for c in range(d):
                diff = X[i, c] - centers[j, c]
                acc += diff * diff
            if acc < best_d:
                best_d = acc
                best = j
        labels[i] = best
        inertia += best_d
    return labels, centers, inertia


def kmeans_lloyd(X, centers, max_iter=100, tol=1e-12):
    X = np.ascontiguousarray(X, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64, copy=True)
    labels, centers, inertia = _kmeans_lloyd_impl(X, centers, max_iter, tol)
    return labels, centers, float(inertia)


@njit(cache=True)
def _dbscan_impl(d2, eps2, min_samples):
    n = d2.shape[0]
    core = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        count = 0
        for j in range(n):
            if d2[i, j] <= eps2:
                count += 1
        core[i] = count >= min_samples
    labels = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        stack[0] = i
        top = 1
        while top > 0:
            top -= 1
            p = stack[top]
            for q in range(n):
                if labels[q] == -1 and d2[p, q] <= eps2:
                    labels[q] = cluster
                    if core[q]:
                        stack[top] = q
                        top += 1
        cluster += 1
    return labels


def dbscan_labels(X, eps, min_samples):
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _dbscan_impl(_sq_dist_matrix(X), float(eps) * float(eps), min_samples)


@njit(cache=True)
def _optics_impl(dist, min_samples):
    n = dist.shape[0]
    core = np.full(n, np.inf)
    if n >= min_samples:
        for i in range(n):
            row = np.sort(dist[i])
            core[i] = row[min_samples - 1]
    reach = np.full(n, np.inf)
    processed = np.zeros(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    for pos in range(n):
        p = -1
        best = np.inf
        for i in range(n):
            if not processed[i] and reach[i] < best:
                best = reach[i]
                p = i
        if p < 0:  # no finite reachability left: start a new component
            for i in range(n):
                if not processed[i]:
                    p = i
                    break
        order[pos] = p
        processed[p] = True
        if np.isfinite(core[p]):
            for q in range(n):
                if not processed[q]:
                    new_reach = dist[p, q]
                    if core[p] > new_reach:
                        new_reach = core[p]
                    if new_reach < reach[q]:
                        reach[q] = new_reach
    return order, reach, core


def optics_graph(X, min_samples):
    X = np.ascontiguousarray(X, dtype=np.float64)
    dist = np.sqrt(_sq_dist_matrix(X))
    return _optics_impl(dist, min_samples)


@njit(cache=True)
def _advance_impl(
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
    n = pos.shape[0]
    for ln in range(1, n_lanes + 1):
        count = 0
        for i in range(n):
            if alive[i] and lane[i] == ln:
                count += 1
        if count == 0:
            continue
        sel = np.empty(count, dtype=np.int64)
        j = 0
        for i in range(n):
            if alive[i] and lane[i] == ln:
                sel[j] = i
                j += 1
        neg = np.empty(count, dtype=np.float64)
        for i in range(count):
            neg[i] = -pos[sel[i]]
        idx = sel[np.argsort(neg, kind="mergesort")]

        prev_new = 0.0
        prev_old_pos = 0.0
        prev_old_speed = 0.0
        prev_pid = -1
        for r in range(count):
            i = idx[r]
            old_p = pos[i]
            old_v = speed[i]
            target = cruise[i]
            if r > 0 and platoon_id[i] >= 0 and platoon_id[i] == prev_pid:
                gap = prev_old_pos - old_p
                target = prev_old_speed + gap_kp * (gap - platoon_gap)
            v_new = target
            lo = old_v - decel * dt
            hi = old_v + accel * dt
            if v_new < lo:
                v_new = lo
            if v_new > hi:
                v_new = hi
            if v_new < 0.0:
                v_new = 0.0
            if v_new > vmax[i]:
                v_new = vmax[i]
            p_unc = old_p + v_new * dt
            if r > 0 and p_unc > prev_new - min_gap:
                p_unc = prev_new - min_gap
            prev_pid = platoon_id[i]
            prev_old_pos = old_p
            prev_old_speed = old_v
            prev_new = p_unc
            pos[i] = p_unc
            speed[i] = (p_unc - old_p) / dt


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
    _advance_impl(
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
    )
