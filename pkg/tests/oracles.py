"""Slow, obviously-correct reference implementations used as test oracles.

These deliberately use different formulations from the production kernels
(union-find components, dict/set scans) so agreement actually checks the
implementations and not a shared code path.
"""

import math


def _dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def reference_dbscan(points, eps, min_samples):
    """Union-find over core-core edges; border points attach to the earliest
    cluster (in id order) that has a core point in range."""
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    neighbors = [
        [j for j in range(n) if _dist(pts[i], pts[j]) <= eps] for i in range(n)
    ]
    core = [len(neighbors[i]) >= min_samples for i in range(n)]

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        if not core[i]:
            continue
        for j in neighbors[i]:
            if core[j]:
                pi, pj = find(i), find(j)
                if pi != pj:
                    parent[pj] = pi

    # cluster ids ordered by each component's smallest core index
    component_of = {}
    for i in range(n):
        if core[i]:
            component_of.setdefault(find(i), []).append(i)
    ordered = sorted(component_of.values(), key=min)
    cluster_of_root = {find(members[0]): cid for cid, members in enumerate(ordered)}

    labels = [-1] * n
    for members in ordered:
        for i in members:
            labels[i] = cluster_of_root[find(i)]
    for i in range(n):
        if labels[i] == -1:
            candidates = sorted(
                cluster_of_root[find(j)] for j in neighbors[i] if core[j]
            )
            if candidates:
                labels[i] = candidates[0]
    return labels


def reference_optics_graph(points, min_samples):
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    dist = [[_dist(pts[i], pts[j]) for j in range(n)] for i in range(n)]
    inf = float("inf")
    if n >= min_samples:
        core = [sorted(dist[i])[min_samples - 1] for i in range(n)]
    else:
        core = [inf] * n
    reach = [inf] * n
    unprocessed = set(range(n))
    order = []
    while unprocessed:
        p = min(unprocessed, key=lambda i: (reach[i], i))
        unprocessed.discard(p)
        order.append(p)
        if core[p] < inf:
            for q in unprocessed:
                candidate = max(core[p], dist[p][q])
                if candidate < reach[q]:
                    reach[q] = candidate
    return order, reach, core


def reference_xi_clusters(plot, xi, min_samples, min_cluster_size):
    """Steep-area scan over the ordered reachability plot, re-coded naively."""
    inf = float("inf")
    r = list(plot) + [inf]
    n = len(plot)
    comp = 1.0 - xi

    def ratio(i):
        # 0/0 and inf/inf are undefined (no steepness direction)
        a, b = r[i], r[i + 1]
        if (a == 0.0 and b == 0.0) or (math.isinf(a) and math.isinf(b)):
            return None
        if b == 0.0:
            return inf
        return a / b

    up, down, s_up, s_down = [], [], [], []
    for i in range(n):
        q = ratio(i)
        if q is None:
            up.append(False), down.append(False), s_up.append(False), s_down.append(False)
            continue
        up.append(q < 1.0)
        down.append(q > 1.0)
        s_up.append(q <= comp)
        s_down.append(q >= 1.0 / comp)

    def extend(steep, xward, start):
        index, end, bad = start, start, 0
        while index < n:
            if steep[index]:
                bad = 0
                end = index
            elif not xward[index]:
                bad += 1
                if bad > min_samples:
                    break
            else:
                return end
            index += 1
        return end

    clusters = []
    sdas = []
    index, mib = 0, 0.0
    steep_indices = [i for i in range(n) if s_up[i] or s_down[i]]
    for si in steep_indices:
        if si < index:
            continue
        mib = max([mib] + r[index : si + 1])
        if math.isinf(mib):
            sdas = []
        else:
            sdas = [d for d in sdas if mib <= r[d["start"]] * comp]
            for d in sdas:
                d["mib"] = max(d["mib"], mib)
        if s_down[si]:
            end = extend(s_down, up, si)
            sdas.append({"start": si, "end": end, "mib": 0.0})
            index = end + 1
            mib = r[index]
        else:
            u_start, u_end = si, extend(s_up, down, si)
            index = u_end + 1
            mib = r[index]
            found = []
            for d in sdas:
                c_start, c_end = d["start"], u_end
                level = r[c_end + 1]
                if level * comp < d["mib"]:
                    continue
                d_max = r[d["start"]]
                if d_max * comp >= level:
                    while r[c_start + 1] > level and c_start < d["end"]:
                        c_start += 1
                elif level * comp >= d_max:
                    while r[c_end - 1] > d_max and c_end > u_start:
                        c_end -= 1
                floor = min(r[c_start : c_end + 1])
                while c_end > c_start and r[c_end] * comp > floor:
                    c_end -= 1
                if c_end - c_start + 1 < min_cluster_size:
                    continue
                if c_start > d["end"] or c_end < u_start:
                    continue
                found.append((c_start, c_end))
            clusters.extend(reversed(found))
    return clusters


def reference_optics(points, min_samples, min_cluster_size, xi=0.05):
    order, reach, _core = reference_optics_graph(points, min_samples)
    plot = [reach[i] for i in order]
    clusters = reference_xi_clusters(plot, xi, min_samples, min_cluster_size)
    ordered_labels = [-1] * len(order)
    next_label = 0
    for start, end in clusters:
        if all(ordered_labels[i] == -1 for i in range(start, end + 1)):
            for i in range(start, end + 1):
                ordered_labels[i] = next_label
            next_label += 1
    labels = [-1] * len(order)
    for position, point in enumerate(order):
        labels[point] = ordered_labels[position]
    return labels


def same_partition(a, b):
    """Equal partitions up to label permutation, with identical noise sets."""
    if len(a) != len(b):
        return False
    fwd, back = {}, {}
    for la, lb in zip(a, b):
        la, lb = int(la), int(lb)
        if (la == -1) != (lb == -1):
            return False
        if la == -1:
            continue
        if fwd.setdefault(la, lb) != lb or back.setdefault(lb, la) != la:
            return False
    return True


def nearest_center_labels(points, centers):
    """Brute-force nearest-center assignment."""
    labels = []
    for p in points:
        best, best_d = -1, float("inf")
        for ci, c in enumerate(centers):
            d = _dist(tuple(p), tuple(c))
            if d < best_d:
                best, best_d = ci, d
        labels.append(best)
    return labels
