"""Situation detection: map the accumulated context stream to situation ids.

A situation id is an integer >= -1; -1 means the situation could not be
determined (not enough data yet, or the newest context is noise). Ids carry
no ordinal meaning. The detector keeps its own copy of all context vectors
received so far; clustering methods re-cluster the full history on every
observation and stabilize the resulting ids against the previous round.
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from ..domain import DomainModel
from ..errors import ConfigMissingError
from ..rules import SituationRules
from .density import dbscan_cluster, optics_cluster
from .kmeans import kmeans_cluster
from .outcome import ClusteringOutcome
from .relabel import stabilize_labels

__all__ = [
    "SituationDetector",
    "ClusteringOutcome",
    "rule_based_detect",
    "kmeans_cluster",
    "dbscan_cluster",
    "optics_cluster",
    "stabilize_labels",
]

MIN_CLUSTER_HISTORY = 10


def rule_based_detect(rules: SituationRules, context: Mapping[str, float]) -> int:
    """Situation id of the first matching rule; -1 when nothing matches."""
    return rules.detect(context)


class SituationDetector:
    """Stateful detector configured from the domain model.

    ``detect`` appends the observation to the internal history, runs the
    configured method over everything seen so far and returns the newest
    observation's situation id. ``labels`` always holds the current
    (stabilized) ids for the whole history, index-aligned with the
    observation sequence.
    """

    def __init__(self, model: DomainModel, situation_rules: Optional[SituationRules] = None):
        self._fields = list(model.context.data)
        settings = model.context.situation_detection_settings
        self.algorithm = settings.algorithm
        self._settings = settings.settings
        self._rules = situation_rules
        if self.algorithm == "RuleBased" and self._rules is None:
            raise ConfigMissingError("RuleBased detection needs a situation rule file")
        self._history: list[list[float]] = []
        self._contexts: list[Mapping[str, float]] = []
        self._labels = np.empty(0, dtype=np.int64)
        self.last_mapping: Mapping[int, int] = {}
        self._seed = int(self._settings.get("seed", 0))

    def __len__(self):
        return len(self._history)

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    def min_history(self) -> int:
        """Observations needed before clustering can run at all."""
        if self.algorithm == "RuleBased":
            return 0
        bound = MIN_CLUSTER_HISTORY
        if "min_samples" in self._settings:
            bound = max(bound, int(self._settings["min_samples"]))
        if self.algorithm == "kMeans":
            if "k" in self._settings:
                bound = max(bound, 2 * int(self._settings["k"]))
            else:
                bound = max(bound, 2 * int(self._settings["k_max"]))
        return bound

    def detect(self, context: Mapping[str, float]) -> int:
        self._history.append([float(context[f]) for f in self._fields])
        self._contexts.append(dict(context))
        self.last_mapping = {}

        if self.algorithm == "RuleBased":
            label = self._rules.detect(context)
            self._labels = np.append(self._labels, np.int64(label))
            return int(label)

        n = len(self._history)
        if n < self.min_history():
            self._labels = np.append(self._labels, np.int64(-1))
            return -1

        points = self._standardized()
        outcome = self._cluster(points)
        stabilized = stabilize_labels(self._labels, outcome.labels)
        self._labels = stabilized.labels
        self.last_mapping = stabilized.id_mapping
        return int(self._labels[-1])

    def _standardized(self) -> np.ndarray:
        data = np.asarray(self._history, dtype=np.float64)
        mean = data.mean(axis=0)
        std = data.std(axis=0)
        std[std == 0.0] = 1.0
        return (data - mean) / std

    def _cluster(self, points: np.ndarray) -> ClusteringOutcome:
        s = self._settings
        if self.algorithm == "DBSCAN":
            return dbscan_cluster(points, eps=float(s["eps"]), min_samples=int(s["min_samples"]))
        if self.algorithm == "OPTICS":
            return optics_cluster(
                points,
                min_samples=int(s["min_samples"]),
                min_cluster_size=int(s["min_cluster_size"]),
                xi=float(s.get("xi", 0.05)),
            )
        if self.algorithm == "kMeans":
            if "k" in s:
                return kmeans_cluster(points, k=int(s["k"]), seed=self._seed)
            return kmeans_cluster(
                points, k_range=(int(s["k_min"]), int(s["k_max"])), seed=self._seed
            )
        raise ConfigMissingError(f"no detector for algorithm {self.algorithm!r}")
