"""Coordination: the top-level control loop.

Every incoming observation is enriched and stored, situation detection runs
over the full history, and depending on the outcome the round either falls
back to user-defined rules (unknown situation or a component failure),
waits out the adaptation cool-down, tunes parameters of the current
strategy, or re-selects the strategy and then tunes.

Situation changes are compared against the situation of the *last emitted
adaptation decision*, not the previous round. A change that happens while
the cool-down is still running therefore cannot be lost: the first round
after the wait sees the change and triggers strategy selection.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .bayesopt import ParameterOptimizer, midpoint_setting
from .detect import SituationDetector
from .domain import DomainModel, load_domain_model
from .errors import RuleFileError, SitoptError, UnknownStrategyReferenceError
from .rules import RuleSet, SituationRules, load_situation_rules, parse_rule_set
from .selection import SelectionContext, select
from .store import NOISE, Observation, ObservationStore

logger = logging.getLogger(__name__)

SOURCE_FALLBACK = "fallback"
SOURCE_SELECTION = "selection"
SOURCE_OPTIMIZATION = "optimization"


@dataclass(frozen=True)
class AdaptationDecision:
    strategy: str
    parameters: Mapping[str, float]

    def to_mapping(self):
        return {"strategy": self.strategy, "parameters": dict(self.parameters)}


@dataclass(frozen=True)
class DecisionRecord:
    round_index: int
    timestamp: float
    situation: int
    decision: AdaptationDecision
    source: str


@dataclass
class SystemModel:
    """Everything the loop has learned and decided so far."""

    current_situation: int = NOISE
    current_decision: Optional[AdaptationDecision] = None
    attempts: dict = field(default_factory=dict)  # (situation, strategy) -> count
    tried: dict = field(default_factory=dict)  # situation -> set of strategies
    last_adaptation_round: Optional[int] = None
    last_decided_situation: Optional[int] = None
    decision_log: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# fallback rules


@dataclass(frozen=True)
class FallbackRules:
    rule_set: RuleSet

    def decide(self, context: Mapping[str, float]) -> AdaptationDecision:
        action = self.rule_set.match(context)
        return AdaptationDecision(action["strategy"], dict(action["parameters"]))

    @property
    def default_decision(self) -> AdaptationDecision:
        action = self.rule_set.default
        return AdaptationDecision(action["strategy"], dict(action["parameters"]))


def _validate_decision_action(action, model: DomainModel, path: str):
    if set(action) != {"strategy", "parameters"}:
        raise RuleFileError(path, "action must have exactly 'strategy' and 'parameters'")
    strategy = action["strategy"]
    if strategy not in model.use_case.available_strategies:
        raise UnknownStrategyReferenceError(path, f"unknown strategy {strategy!r}")
    params = action["parameters"]
    if not isinstance(params, dict):
        raise RuleFileError(f"{path}.parameters", "expected a mapping")
    specs = {s.name: s for s in model.parameters_for_strategy(strategy)}
    if set(params) != set(specs):
        raise RuleFileError(
            f"{path}.parameters",
            f"expected exactly {sorted(specs)} for {strategy!r}, got {sorted(params)}",
        )
    for name, value in params.items():
        spec = specs[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise RuleFileError(f"{path}.parameters.{name}", "expected a number")
        if spec.data_type == "int" and not isinstance(value, int):
            raise RuleFileError(f"{path}.parameters.{name}", "expected an integer")
        if not spec.min <= value <= spec.max:
            raise RuleFileError(
                f"{path}.parameters.{name}", f"{value!r} outside [{spec.min}, {spec.max}]"
            )


def parse_fallback_rules(text: str, model: DomainModel) -> FallbackRules:
    """Parse fallback rules; the default rule is mandatory so a decision
    always exists, and every action must be valid for the domain model."""
    rule_set = parse_rule_set(text)
    if rule_set.default is None:
        raise RuleFileError("default", "fallback rules need a default action")
    unknown = rule_set.referenced_fields() - set(model.context.data)
    if unknown:
        raise RuleFileError("rules", f"conditions reference unknown fields: {sorted(unknown)}")
    for i, rule in enumerate(rule_set.rules):
        _validate_decision_action(rule.action, model, f"rules[{i}].then")
    _validate_decision_action(rule_set.default, model, "default")
    return FallbackRules(rule_set)


def load_fallback_rules(path, model: DomainModel) -> FallbackRules:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_fallback_rules(fh.read(), model)


def apply_fallback(rules: FallbackRules, context: Mapping[str, float]) -> AdaptationDecision:
    """First matching rule's decision; the default guarantees a result."""
    return rules.decide(context)


# ---------------------------------------------------------------------------
# the framework


class Framework:
    def __init__(
        self,
        model: DomainModel,
        fallback_rules: FallbackRules,
        situation_rules: Optional[SituationRules] = None,
        seed: int = 0,
        store_log_path=None,
    ):
        self.model = model
        self.store = ObservationStore(model, log_path=store_log_path)
        self.detector = SituationDetector(model, situation_rules)
        self.optimizer = ParameterOptimizer(seed=seed)
        self.fallback_rules = fallback_rules
        self.system = SystemModel()
        self.component_errors: list[tuple[int, str, str]] = []
        self._round = -1
        self._last_params: dict[str, dict] = {}

    # -- helpers -------------------------------------------------------------

    @property
    def decision_log(self):
        return self.system.decision_log

    def propagate_situation_change(self, old: int, new: int) -> None:
        """Record a situation change the instant detection reports it.

        Attempt counters and tried sets are keyed by situation id, so they
        switch atomically with ``current_situation``; selection eligibility
        is judged against the situation of the last emitted decision, which
        this method deliberately does not touch.
        """
        assert old != new
        self.system.current_situation = new

    def _fail(self, component: str, exc: Exception):
        self.component_errors.append((self._round, component, repr(exc)))
        logger.warning("round %d: %s failed (%s); falling back", self._round, component, exc)

    def _emit(self, timestamp: float, situation: int, decision: AdaptationDecision, source: str):
        self.system.decision_log.append(
            DecisionRecord(self._round, timestamp, situation, decision, source)
        )
        self.system.current_decision = decision
        self._last_params[decision.strategy] = dict(decision.parameters)
        if source != SOURCE_FALLBACK:
            self.system.last_adaptation_round = self._round
            self.system.last_decided_situation = situation
        return decision

    def _fallback_decision(self, obs: Observation) -> AdaptationDecision:
        decision = apply_fallback(self.fallback_rules, obs.context)
        return self._emit(obs.timestamp, self.system.current_situation, decision, SOURCE_FALLBACK)

    # -- the loop ------------------------------------------------------------

    def on_observation(self, obs: Observation) -> Optional[AdaptationDecision]:
        """Process one observation; returns the decision emitted this round,
        if any. Component failures degrade the round to the fallback path."""
        self._round += 1
        enriched = self.store.ingest(obs)

        try:
            situation = self.detector.detect(obs.context)
        except SitoptError as exc:
            self._fail("situation detection", exc)
            self.system.current_situation = NOISE
            return self._fallback_decision(obs)

        if self.detector.algorithm == "RuleBased":
            enriched.situation = situation
        else:
            # re-clustering may have relabeled the whole history
            self.store.assign_situations(self.detector.labels)

        if situation == NOISE:
            if self.system.current_situation != NOISE:
                self.propagate_situation_change(self.system.current_situation, NOISE)
            return self._fallback_decision(obs)

        if situation != self.system.current_situation:
            self.propagate_situation_change(self.system.current_situation, situation)

        settings = self.model.selection_settings
        last_round = self.system.last_adaptation_round
        if (
            last_round is not None
            and self._round - last_round < settings.observations_between_adaptations
        ):
            return None  # cool-down still running

        active_strategy = obs.input.strategy
        observed_key = (situation, active_strategy)
        # the newest observation evaluates the configuration applied last
        # round; feed it to the surrogate for that (situation, strategy)
        self.optimizer.observe(observed_key, dict(obs.input.parameters), enriched.hypervolume)

        last_decided = self.system.last_decided_situation
        changed = last_decided is not None and last_decided != situation
        attempts_done = self.system.attempts.get(observed_key, 0)

        if not changed and attempts_done < settings.min_optimization_attempts:
            chosen = active_strategy
            source = SOURCE_OPTIMIZATION
        else:
            try:
                chosen = self._select_strategy(situation, active_strategy, attempts_done)
            except SitoptError as exc:
                self._fail("strategy selection", exc)
                return self._fallback_decision(obs)
            source = SOURCE_SELECTION
            if chosen != active_strategy:
                self.system.attempts[(situation, chosen)] = 0  # fresh trial

        try:
            parameters = self._propose_parameters(situation, chosen)
        except SitoptError as exc:
            self._fail("parameter optimization", exc)
            return self._fallback_decision(obs)

        self.system.attempts[(situation, chosen)] = self.system.attempts.get(
            (situation, chosen), 0
        ) + 1
        self.system.tried.setdefault(situation, set()).add(chosen)
        return self._emit(
            obs.timestamp, situation, AdaptationDecision(chosen, parameters), source
        )

    def _select_strategy(self, situation: int, active_strategy: str, attempts_done: int) -> str:
        settings = self.model.selection_settings
        situation_obs = self.store.query(situation=situation)
        ctx = SelectionContext(
            current_strategy=active_strategy,
            attempts_done=attempts_done,
            window=situation_obs[-settings.window_size :],
            situation_observations=situation_obs,
            tried=frozenset(self.system.tried.get(situation, set())),
            settings=settings,
            measures=self.model.performance_measures,
        )
        return select(ctx, self.model.use_case.available_strategies)

    def _propose_parameters(self, situation: int, strategy: str) -> dict:
        key = (situation, strategy)
        specs = self.model.parameters_for_strategy(strategy)
        if not self.optimizer.has_state(key):
            # first time here: bootstrap from whatever the store already has
            # for this combination (e.g. rounds driven by fallback rules)
            history = [
                ({n: o.base.input.parameters[n] for n in (s.name for s in specs)}, o.hypervolume)
                for o in self.store.query(situation=situation, strategy=strategy)
            ]
            self.optimizer.activate(key, history)
        current = self._last_params.get(strategy)
        if current is None:
            current = midpoint_setting(specs)
        else:
            current = {s.name: current[s.name] for s in specs}
        return self.optimizer.propose(key, specs, current)

    # -- exports ---------------------------------------------------------------

    def export_decisions_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "timestamp", "situation", "strategy", "parameters", "source"])
            for rec in self.system.decision_log:
                writer.writerow(
                    [
                        rec.round_index,
                        repr(rec.timestamp),
                        rec.situation,
                        rec.decision.strategy,
                        json.dumps(dict(rec.decision.parameters), sort_keys=True),
                        rec.source,
                    ]
                )


def load_framework(ddm_path, seed: int = 0, store_log_path=None) -> Framework:
    """Build a framework from a domain model file, resolving the fallback and
    situation rule files relative to it."""
    ddm_path = Path(ddm_path)
    model = load_domain_model(ddm_path)
    base = ddm_path.parent
    fallback = load_fallback_rules(base / model.use_case.fallback_rules, model)
    situation_rules = None
    detection = model.context.situation_detection_settings
    if detection.algorithm == "RuleBased":
        situation_rules = load_situation_rules(
            base / str(detection.require("rules")), known_fields=list(model.context.data)
        )
    return Framework(
        model,
        fallback,
        situation_rules=situation_rules,
        seed=seed,
        store_log_path=store_log_path,
    )
