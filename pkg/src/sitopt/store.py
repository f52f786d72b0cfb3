"""Empirical observation repository.

Every observation from the managed system is a timestamped triple
(context, input, metrics). On ingestion it is enriched with two derived
quantities: the hypervolume score of its metrics and the time the active
(strategy, parameters) configuration has been in place. The store is
append-only; situation labels are assigned later by situation detection
and may be rewritten when re-clustering restructures the history.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .domain import DomainModel, PerformanceMeasureSpec
from .errors import (
    KeyMismatchError,
    NonFiniteValueError,
    NonMonotonicTimestampError,
    SchemaViolationError,
)

NOISE = -1


@dataclass(frozen=True)
class StrategyInput:
    """The configuration the managed system was running when it observed."""

    strategy: str
    parameters: Mapping[str, float]

    def same_configuration(self, other: "StrategyInput") -> bool:
        return self.strategy == other.strategy and dict(self.parameters) == dict(
            other.parameters
        )


@dataclass(frozen=True)
class Observation:
    timestamp: float  # seconds since run start
    context: Mapping[str, float]
    input: StrategyInput
    metrics: Mapping[str, float]


@dataclass
class EnrichedObservation:
    base: Observation
    hypervolume: float
    config_active_for: float
    situation: int = NOISE

    @property
    def timestamp(self):
        return self.base.timestamp

    @property
    def strategy(self):
        return self.base.input.strategy


def compute_hypervolume(
    metrics: Mapping[str, float], specs: Mapping[str, PerformanceMeasureSpec]
) -> float:
    """Volume a single performance vector dominates relative to the reference.

    Each measure contributes an oriented gap to its reference value
    (``value - reference`` when higher is better, ``reference - value``
    otherwise). The dominated volume of one point is the product of those
    gaps; if any gap is <= 0 the point does not dominate the reference and
    the score is zero.
    """
    if set(metrics) != set(specs):
        missing = sorted(set(specs) - set(metrics))
        extra = sorted(set(metrics) - set(specs))
        raise KeyMismatchError(f"metric keys mismatch (missing={missing}, unexpected={extra})")
    volume = 1.0
    for name, spec in specs.items():
        value = metrics[name]
        if not math.isfinite(value):
            raise NonFiniteValueError(f"metric {name!r} is not finite: {value!r}")
        gap = value - spec.reference_value if spec.higher_is_better else spec.reference_value - value
        if gap <= 0:
            return 0.0
        volume *= gap
    return volume


def validate_observation(obs: Observation, model: DomainModel) -> None:
    """Check an observation against the declared schema; collect all errors."""
    errors = []
    declared_context = set(model.context.data)
    got_context = set(obs.context)
    for name in sorted(declared_context - got_context):
        errors.append(f"context.{name}: missing")
    for name in sorted(got_context - declared_context):
        errors.append(f"context.{name}: not declared")
    for name in sorted(declared_context & got_context):
        value = obs.context[name]
        spec = model.context.data[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"context.{name}: expected a number")
        elif spec.data_type == "int" and not isinstance(value, int):
            errors.append(f"context.{name}: expected an integer, got {value!r}")
        elif not math.isfinite(value):
            errors.append(f"context.{name}: not finite")

    if obs.input.strategy not in model.use_case.available_strategies:
        errors.append(f"input.strategy: unknown strategy {obs.input.strategy!r}")
    else:
        specs = {o.name: o for o in model.parameters_for_strategy(obs.input.strategy)}
        got_params = set(obs.input.parameters)
        for name in sorted(set(specs) - got_params):
            errors.append(f"input.parameters.{name}: missing")
        for name in sorted(got_params - set(specs)):
            errors.append(f"input.parameters.{name}: not applicable to {obs.input.strategy!r}")
        for name in sorted(set(specs) & got_params):
            value = obs.input.parameters[name]
            spec = specs[name]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                errors.append(f"input.parameters.{name}: expected a number")
            elif spec.data_type == "int" and not isinstance(value, int):
                errors.append(f"input.parameters.{name}: expected an integer, got {value!r}")
            elif not spec.min <= value <= spec.max:
                errors.append(
                    f"input.parameters.{name}: {value!r} outside [{spec.min}, {spec.max}]"
                )

    declared_metrics = set(model.performance_measures)
    got_metrics = set(obs.metrics)
    for name in sorted(declared_metrics - got_metrics):
        errors.append(f"metrics.{name}: missing")
    for name in sorted(got_metrics - declared_metrics):
        errors.append(f"metrics.{name}: not declared")
    for name in sorted(declared_metrics & got_metrics):
        value = obs.metrics[name]
        spec = model.performance_measures[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"metrics.{name}: expected a number")
        elif spec.data_type == "int" and not isinstance(value, int):
            errors.append(f"metrics.{name}: expected an integer, got {value!r}")
        elif not math.isfinite(value):
            errors.append(f"metrics.{name}: not finite")

    if errors:
        raise SchemaViolationError(errors)


def observation_from_mapping(body: Mapping) -> Observation:
    """Build an Observation from its wire form (see the adapter module)."""
    try:
        inp = body["input"]
        return Observation(
            timestamp=body["timestamp"],
            context=dict(body["context"]),
            input=StrategyInput(inp["strategy"], dict(inp["parameters"])),
            metrics=dict(body["metrics"]),
        )
    except (KeyError, TypeError) as exc:
        from .errors import MalformedBodyError

        raise MalformedBodyError(f"observation body is malformed: {exc!r}") from exc


def observation_to_mapping(obs: Observation) -> dict:
    return {
        "timestamp": obs.timestamp,
        "context": dict(obs.context),
        "input": {"strategy": obs.input.strategy, "parameters": dict(obs.input.parameters)},
        "metrics": dict(obs.metrics),
    }


class ObservationStore:
    """Chronological store of enriched observations.

    One writer (the coordination loop) and any number of readers; readers
    get snapshot lists they must not mutate further than relabeling allows.
    Optionally persists every ingested observation to an append-only
    line-delimited JSON log so a crashed run can be replayed.
    """

    def __init__(self, model: DomainModel, log_path=None):
        self._model = model
        self._records: list[EnrichedObservation] = []
        self._lock = threading.Lock()
        self._log_path = log_path
        self._log_file = open(log_path, "a", encoding="utf-8") if log_path else None

    def __len__(self):
        return len(self._records)

    def close(self):
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    def ingest(self, obs: Observation) -> EnrichedObservation:
        validate_observation(obs, self._model)
        with self._lock:
            prev = self._records[-1] if self._records else None
            if prev is not None and obs.timestamp < prev.timestamp:
                raise NonMonotonicTimestampError(
                    f"timestamp {obs.timestamp} is before {prev.timestamp}"
                )
            if prev is not None and obs.input.same_configuration(prev.base.input):
                active = prev.config_active_for + (obs.timestamp - prev.timestamp)
            else:
                active = 0.0
            enriched = EnrichedObservation(
                base=obs,
                hypervolume=compute_hypervolume(obs.metrics, self._model.performance_measures),
                config_active_for=active,
                situation=NOISE,
            )
            self._records.append(enriched)
            if self._log_file is not None:
                self._log_file.write(json.dumps(observation_to_mapping(obs)) + "\n")
                self._log_file.flush()
        return enriched

    def query(
        self,
        situation: Optional[int] = None,
        strategy: Optional[str] = None,
        last_n: Optional[int] = None,
    ) -> list[EnrichedObservation]:
        """Observations matching all present filters, chronologically ordered."""
        with self._lock:
            rows = [
                r
                for r in self._records
                if (situation is None or r.situation == situation)
                and (strategy is None or r.strategy == strategy)
            ]
        if last_n is not None:
            rows = rows[-last_n:]
        return rows

    def relabel(self, mapping: Mapping[int, int]) -> int:
        """Substitute situation labels; ids absent from the mapping pass through."""
        changed = 0
        with self._lock:
            for record in self._records:
                new = mapping.get(record.situation, record.situation)
                if new != record.situation:
                    record.situation = new
                    changed += 1
        return changed

    def assign_situations(self, labels: Sequence[int]) -> int:
        """Overwrite stored labels index-aligned with the observation sequence.

        Used after a re-clustering restructured the history in ways a pure
        id rename cannot express (splits). Returns the number of rows whose
        label changed.
        """
        if len(labels) != len(self._records):
            raise ValueError(
                f"label vector of length {len(labels)} for {len(self._records)} observations"
            )
        changed = 0
        with self._lock:
            for record, label in zip(self._records, labels):
                if record.situation != label:
                    record.situation = int(label)
                    changed += 1
        return changed

    # -- persistence ---------------------------------------------------------

    @classmethod
    def replay(cls, model: DomainModel, log_path) -> "ObservationStore":
        """Rebuild a store from an append-only log; enrichment is recomputed."""
        store = cls(model)
        with open(log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    store.ingest(observation_from_mapping(json.loads(line)))
        return store

    def export_csv(self, path) -> None:
        context_fields = list(self._model.context.data)
        metric_fields = list(self._model.performance_measures)
        param_fields = list(self._model.parameter_options.options)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["timestamp", "situation", "strategy", "hypervolume", "config_active_for"]
                + [f"context.{c}" for c in context_fields]
                + [f"metric.{m}" for m in metric_fields]
                + [f"param.{p}" for p in param_fields]
            )
            for r in self.query():
                writer.writerow(
                    [
                        repr(r.timestamp),
                        r.situation,
                        r.strategy,
                        repr(r.hypervolume),
                        repr(r.config_active_for),
                    ]
                    + [repr(r.base.context[c]) for c in context_fields]
                    + [repr(r.base.metrics[m]) for m in metric_fields]
                    + [
                        repr(r.base.input.parameters[p]) if p in r.base.input.parameters else ""
                        for p in param_fields
                    ]
                )
