"""Density-based clustering: DBSCAN and OPTICS with xi cluster extraction.

The distance-heavy parts (neighbor counting, reachability sweep) run in the
selected kernel backend; the xi extraction walks the ordered reachability
plot once in plain Python.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import EmptyInputError
from .kmeans import canonical_labels
from .outcome import ClusteringOutcome

DEFAULT_XI = 0.05


def dbscan_cluster(points, eps, min_samples) -> ClusteringOutcome:
    """Classic DBSCAN. Neighborhoods are closed balls and count the point itself."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise EmptyInputError("no points to cluster")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    labels = _kernels.dbscan_labels(X, float(eps), int(min_samples))
    return ClusteringOutcome(labels=labels, id_mapping={})


def optics_cluster(points, min_samples, min_cluster_size, xi=DEFAULT_XI) -> ClusteringOutcome:
    """OPTICS reachability ordering with xi-steep cluster extraction.

    Clusters smaller than ``min_cluster_size`` dissolve to noise; points not
    covered by any accepted cluster are noise.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n == 0:
        raise EmptyInputError("no points to cluster")
    if min_samples < 1 or min_cluster_size < 1:
        raise ValueError("min_samples and min_cluster_size must be >= 1")
    order, reach, _ = _kernels.optics_graph(X, int(min_samples))
    plot = reach[order]
    clusters = xi_clusters(plot, xi, int(min_samples), int(min_cluster_size))
    ordered_labels = labels_from_spans(n, clusters)
    labels = np.full(n, -1, dtype=np.int64)
    labels[order] = ordered_labels
    return ClusteringOutcome(labels=canonical_labels(labels), id_mapping={})


def _extend_region(steep, xward, start, min_samples):
    """Longest region from ``start`` with at most min_samples consecutive
    non-steep points and no point going the opposite (xward) way."""
    n = len(steep)
    index = start
    end = start
    non_steep = 0
    while index < n:
        if steep[index]:
            non_steep = 0
            end = index
        elif not xward[index]:
            non_steep += 1
            if non_steep > min_samples:
                break
        else:
            return end
        index += 1
    return end


def xi_clusters(plot, xi, min_samples, min_cluster_size):
    """Cluster spans [start, end] (inclusive) on the ordered reachability plot.

    Follows the steep-area scan of the OPTICS paper with the usual
    corrections: the plot is extended by an inf sentinel so trailing
    clusters close, and boundary points are pulled inward until both ends
    sit at comparable reachability levels. One further trim keeps cluster
    tails honest: a span's last bar may not sit xi-steeply above the span's
    reachability floor (otherwise a lone far point absorbed by the closing
    slope would count as a member). Spans are emitted smaller-first so
    nested clusters take precedence during labeling.
    """
    n = len(plot)
    r = np.empty(n + 1)
    r[:n] = plot
    r[n] = np.inf
    complement = 1.0 - xi
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = r[:-1] / r[1:]
        steep_up = ratio <= complement
        steep_down = ratio >= 1.0 / complement
        upward = ratio < 1.0
        downward = ratio > 1.0

    clusters: list[tuple[int, int]] = []
    sdas: list[dict] = []
    index = 0
    mib = 0.0
    for steep_index in np.flatnonzero(steep_up | steep_down):
        steep_index = int(steep_index)
        if steep_index < index:
            continue
        mib = max(mib, float(r[index : steep_index + 1].max()))

        if steep_down[steep_index]:
            sdas = _update_filter_sdas(sdas, mib, complement, r)
            start = steep_index
            end = _extend_region(steep_down, upward, start, min_samples)
            sdas.append({"start": start, "end": end, "mib": 0.0})
            index = end + 1
            mib = float(r[index])
        else:
            sdas = _update_filter_sdas(sdas, mib, complement, r)
            u_start = steep_index
            u_end = _extend_region(steep_up, downward, u_start, min_samples)
            index = u_end + 1
            mib = float(r[index])

            found = []
            for sda in sdas:
                c_start = sda["start"]
                c_end = u_end
                end_level = r[c_end + 1]
                if end_level * complement < sda["mib"]:
                    continue
                d_max = r[sda["start"]]
                if d_max * complement >= end_level:
                    # left edge much higher: pull the start down to the end level
                    while r[c_start + 1] > end_level and c_start < sda["end"]:
                        c_start += 1
                elif end_level * complement >= d_max:
                    # right edge much higher: pull the end down to the start level
                    while r[c_end - 1] > d_max and c_end > u_start:
                        c_end -= 1
                floor = float(r[c_start : c_end + 1].min())
                while c_end > c_start and r[c_end] * complement > floor:
                    c_end -= 1
                if c_end - c_start + 1 < min_cluster_size:
                    continue
                if c_start > sda["end"]:
                    continue
                if c_end < u_start:
                    continue
                found.append((c_start, c_end))
            found.reverse()
            clusters.extend(found)
    return clusters


def _update_filter_sdas(sdas, mib, complement, r):
    if np.isinf(mib):
        return []
    kept = [sda for sda in sdas if mib <= r[sda["start"]] * complement]
    for sda in kept:
        sda["mib"] = max(sda["mib"], mib)
    return kept


def labels_from_spans(n, clusters):
    """First-fit labeling: a span only claims positions none of which are taken,
    so nested (smaller, earlier) clusters win over enclosing ones."""
    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for start, end in clusters:
        segment = labels[start : end + 1]
        if (segment == -1).all():
            labels[start : end + 1] = next_label
            next_label += 1
    return labels
