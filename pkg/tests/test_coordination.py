"""Scripted closed-loop tests for the coordination loop.

A tiny synthetic managed system: one context field drives rule-based
situation detection, one metric directly equals the hypervolume score, and
the 'use case' perfectly applies the last emitted decision.
"""

import pytest

from sitopt import errors
from sitopt.coordination import (
    SOURCE_FALLBACK,
    SOURCE_OPTIMIZATION,
    SOURCE_SELECTION,
    Framework,
    parse_fallback_rules,
)
from sitopt.domain import domain_model_from_mapping
from sitopt.rules import parse_situation_rules
from sitopt.store import Observation, StrategyInput


def make_model(
    detection=None,
    observations_between_adaptations=1,
    min_optimization_attempts=5,
    window_size=5,
    threshold_exceeds=3,
    hypervolume_threshold=0.5,
):
    detection = detection or {"algorithm": "RuleBased", "settings": {"rules": "rules.yaml"}}
    return domain_model_from_mapping(
        {
            "use_case": {
                "name": "scripted",
                "available_strategies": ["A", "B", "C"],
                "fallback_rules": "fallback.yaml",
            },
            "context": {
                "data": {"count": {"data_type": "int"}},
                "situation_detection_settings": detection,
            },
            "parameter_options": {
                "options": {"p": {"data_type": "int", "min": 0, "max": 100}},
                "strategy_selection_settings": {
                    "observations_between_adaptations": observations_between_adaptations,
                    "min_optimization_attempts": min_optimization_attempts,
                    "window_size": window_size,
                    "threshold_exceeds": threshold_exceeds,
                    "method": "hypervolume",
                    "hypervolume_threshold": hypervolume_threshold,
                },
            },
            "performance_measures": {
                "score": {
                    "data_type": "double",
                    "higher_is_better": True,
                    "reference_value": 0.0,
                    "threshold_value": 0.5,
                }
            },
        }
    )


SITUATION_RULES = parse_situation_rules(
    """
rules:
  - when: [{field: count, op: "<=", value: 100}]
    then: {situation: 0}
  - when: [{field: count, op: "<=", value: 200}]
    then: {situation: 1}
  - when: [{field: count, op: "<=", value: 300}]
    then: {situation: 2}
default: {situation: -1}
"""
)

FALLBACK_TEXT = """
rules: []
default:
  strategy: A
  parameters: {p: 10}
"""


def make_framework(model, **kw):
    rules = parse_fallback_rules(FALLBACK_TEXT, model)
    situation_rules = None
    if model.context.situation_detection_settings.algorithm == "RuleBased":
        situation_rules = SITUATION_RULES
    return Framework(model, rules, situation_rules=situation_rules, seed=0, **kw)


class ScriptedLoop:
    """Feeds (count, score) pairs; the input echoes the latest decision."""

    def __init__(self, framework):
        self.framework = framework
        self.active = framework.fallback_rules.default_decision
        self.t = 0.0
        self.decisions = []

    def push(self, count, score):
        obs = Observation(
            timestamp=self.t,
            context={"count": count},
            input=StrategyInput(self.active.strategy, dict(self.active.parameters)),
            metrics={"score": score},
        )
        self.t += 30.0
        decision = self.framework.on_observation(obs)
        self.decisions.append(decision)
        if decision is not None:
            self.active = decision
        return decision


class TestFallbackAndDetectionGate:
    def test_fallback_until_enough_data_then_first_optimization(self):
        # clustering needs 20 observations; until then every round falls back
        model = make_model(detection={"algorithm": "DBSCAN", "settings": {"min_samples": 20, "eps": 0.5}})
        fw = make_framework(model)
        loop = ScriptedLoop(fw)
        for r in range(19):
            decision = loop.push(50, 0.9)
            assert decision is not None
            assert fw.decision_log[-1].source == SOURCE_FALLBACK
        decision = loop.push(50, 0.9)
        assert fw.decision_log[-1].source == SOURCE_OPTIMIZATION
        assert fw.decision_log[-1].situation == 0
        assert decision.strategy == "A"

    def test_fallback_decision_recomputed_from_context(self):
        model = make_model()
        rules = parse_fallback_rules(
            """
rules:
  - when: [{field: count, op: ">", value: 500}]
    then: {strategy: B, parameters: {p: 5}}
default: {strategy: A, parameters: {p: 10}}
""",
            model,
        )
        fw = Framework(model, rules, situation_rules=SITUATION_RULES, seed=0)
        loop = ScriptedLoop(fw)
        decision = loop.push(600, 0.9)  # no rule band matches count 600 -> noise
        assert fw.decision_log[-1].source == SOURCE_FALLBACK
        assert decision.strategy == "B"


class TestAttemptsProgression:
    def test_five_optimization_rounds_then_selection_eligible(self):
        fw = make_framework(make_model(min_optimization_attempts=5))
        loop = ScriptedLoop(fw)
        sources = []
        for r in range(6):
            loop.push(50, 0.9)
            sources.append(fw.decision_log[-1].source)
        assert sources[:5] == [SOURCE_OPTIMIZATION] * 5
        assert sources[5] == SOURCE_SELECTION
        assert fw.system.attempts[(0, "A")] == 6  # selection kept A and proposed again

    def test_good_scores_never_switch_strategy(self):
        fw = make_framework(make_model())
        loop = ScriptedLoop(fw)
        for _ in range(20):
            decision = loop.push(50, 0.9)
            assert decision.strategy == "A"

    def test_bad_scores_walk_through_declaration_order(self):
        fw = make_framework(make_model(min_optimization_attempts=2))
        loop = ScriptedLoop(fw)
        seen = []
        for _ in range(30):
            decision = loop.push(50, 0.1)
            if decision.strategy not in seen:
                seen.append(decision.strategy)
        assert seen == ["A", "B", "C"]


class TestSituationChange:
    def test_change_triggers_selection_immediately(self):
        fw = make_framework(make_model(min_optimization_attempts=50))
        loop = ScriptedLoop(fw)
        for _ in range(4):
            loop.push(50, 0.9)
            assert fw.decision_log[-1].source == SOURCE_OPTIMIZATION
        loop.push(150, 0.9)  # situation 0 -> 1 with attempts far below the minimum
        assert fw.decision_log[-1].source == SOURCE_SELECTION
        assert fw.decision_log[-1].situation == 1

    def test_noise_interlude_preserves_counters(self):
        fw = make_framework(make_model(min_optimization_attempts=50))
        loop = ScriptedLoop(fw)
        for _ in range(3):
            loop.push(50, 0.9)
        attempts_before = fw.system.attempts[(0, "A")]
        loop.push(999, 0.9)  # unmatched band: noise -> fallback
        assert fw.decision_log[-1].source == SOURCE_FALLBACK
        assert fw.system.attempts[(0, "A")] == attempts_before
        loop.push(50, 0.9)  # resume: same decided situation, optimize path
        assert fw.decision_log[-1].source == SOURCE_OPTIMIZATION
        assert fw.system.attempts[(0, "A")] == attempts_before + 1

    def test_re_detection_resumes_tried_set(self):
        fw = make_framework(make_model(min_optimization_attempts=0, threshold_exceeds=1, window_size=1))
        loop = ScriptedLoop(fw)
        loop.push(50, 0.1)  # situation 0: violations -> first untried (B)
        assert loop.decisions[-1].strategy == "B"
        loop.push(150, 0.9)  # situation 1
        loop.push(50, 0.1)  # back to situation 0: tried={A,B} resumed -> C
        assert loop.decisions[-1].strategy == "C"


class TestWaitingTime:
    def test_no_two_decisions_closer_than_the_wait(self):
        fw = make_framework(make_model(observations_between_adaptations=3))
        loop = ScriptedLoop(fw)
        rounds_with_decision = []
        for r in range(12):
            if loop.push(50, 0.9) is not None:
                rounds_with_decision.append(r)
        gaps = [b - a for a, b in zip(rounds_with_decision, rounds_with_decision[1:])]
        assert rounds_with_decision and min(gaps) >= 3

    def test_lost_situation_change_regression(self):
        # a change that lands mid-wait must produce a selection-sourced
        # decision for the NEW situation at the first post-wait round
        fw = make_framework(make_model(observations_between_adaptations=3, min_optimization_attempts=50))
        loop = ScriptedLoop(fw)
        assert loop.push(50, 0.9) is not None  # round 0: adaptation, wait begins
        assert loop.push(150, 0.9) is None  # round 1: situation changes mid-wait
        assert loop.push(150, 0.9) is None  # round 2: still waiting
        decision = loop.push(150, 0.9)  # round 3: first post-wait round
        assert decision is not None
        last = fw.decision_log[-1]
        assert last.source == SOURCE_SELECTION
        assert last.situation == 1

    def test_decision_log_situation_always_matches_detection(self):
        fw = make_framework(make_model(observations_between_adaptations=2, min_optimization_attempts=3))
        loop = ScriptedLoop(fw)
        stream = [50, 50, 150, 150, 50, 250, 250, 50, 150, 999, 50, 50]
        for count in stream:
            loop.push(count, 0.6)
        for record in fw.decision_log:
            expected = SITUATION_RULES.detect({"count": stream[record.round_index]})
            assert record.situation == expected


class TestDegradationAndExports:
    def test_component_failure_falls_back(self):
        model = make_model()
        bad_rules = parse_situation_rules(
            'rules:\n  - when: [{field: missing, op: "<", value: 1}]\n    then: {situation: 0}\n'
        )
        fw = Framework(
            model,
            parse_fallback_rules(FALLBACK_TEXT, model),
            situation_rules=bad_rules,
            seed=0,
        )
        loop = ScriptedLoop(fw)
        decision = loop.push(50, 0.9)
        assert decision == fw.fallback_rules.default_decision
        assert fw.decision_log[-1].source == SOURCE_FALLBACK
        assert fw.component_errors and fw.component_errors[0][1] == "situation detection"

    def test_every_decision_is_valid_for_the_model(self):
        fw = make_framework(make_model(min_optimization_attempts=2))
        loop = ScriptedLoop(fw)
        for r in range(25):
            loop.push(50 if r % 3 else 150, 0.1 if r % 2 else 0.9)
        for record in fw.decision_log:
            assert record.decision.strategy in ("A", "B", "C")
            assert set(record.decision.parameters) == {"p"}
            assert 0 <= record.decision.parameters["p"] <= 100

    def test_replay_is_deterministic(self):
        logs = []
        for _ in range(2):
            fw = make_framework(make_model(min_optimization_attempts=2))
            loop = ScriptedLoop(fw)
            for r in range(30):
                loop.push(50 if r % 4 else 250, 0.1 if r % 2 else 0.9)
            logs.append(
                [
                    (d.round_index, d.situation, d.decision.strategy, dict(d.decision.parameters), d.source)
                    for d in fw.decision_log
                ]
            )
        assert logs[0] == logs[1]

    def test_decision_csv_export(self, tmp_path):
        fw = make_framework(make_model())
        loop = ScriptedLoop(fw)
        for _ in range(3):
            loop.push(50, 0.9)
        out = tmp_path / "decisions.csv"
        fw.export_decisions_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "round,timestamp,situation,strategy,parameters,source"
        assert len(lines) == 4
