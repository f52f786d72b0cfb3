"""Label stabilization across re-clustering rounds.

Clustering the full history again may renumber or restructure clusters.
To keep situation ids stable over time, fresh cluster ids are renamed to
the previous round's ids by greedy maximum overlap on the shared prefix;
genuinely new clusters get ids above everything seen before.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from ..errors import LengthMismatchError
from .outcome import ClusteringOutcome


def stabilize_labels(previous, fresh) -> ClusteringOutcome:
    """Rename ``fresh`` cluster ids to align with ``previous``.

    ``previous`` covers the first ``len(previous)`` points underlying
    ``fresh``. Pairs are matched in decreasing overlap; ties prefer the
    lower previous id, then the lower fresh id. Unmatched fresh clusters
    receive ids max(previous)+1, +2, ... in order of first appearance.
    Noise (-1) is never remapped.
    """
    previous = np.asarray(previous, dtype=np.int64)
    fresh = np.asarray(fresh, dtype=np.int64)
    if len(previous) > len(fresh):
        raise LengthMismatchError(
            f"previous has {len(previous)} labels but fresh only {len(fresh)}"
        )

    overlap = Counter()
    for old, new in zip(previous, fresh):
        if old >= 0 and new >= 0:
            overlap[(new, old)] += 1

    pairs = sorted(overlap.items(), key=lambda item: (-item[1], item[0][1], item[0][0]))
    mapping: dict[int, int] = {}
    used_old: set[int] = set()
    for (fresh_id, old_id), _count in pairs:
        if fresh_id in mapping or old_id in used_old:
            continue
        mapping[fresh_id] = old_id
        used_old.add(old_id)

    next_id = int(previous[previous >= 0].max()) + 1 if (previous >= 0).any() else 0
    for fresh_id in fresh:
        fresh_id = int(fresh_id)
        if fresh_id >= 0 and fresh_id not in mapping:
            mapping[fresh_id] = next_id
            next_id += 1

    stabilized = np.array(
        [mapping[int(f)] if f >= 0 else -1 for f in fresh], dtype=np.int64
    )
    return ClusteringOutcome(labels=stabilized, id_mapping=mapping)
