"""Declarative condition->action rules.

One grammar serves both rule kinds used by the framework: situation rules
(action assigns a situation id) and fallback rules (action names a strategy
and a parameter setting). A rule file is YAML::

    rules:
      - when:
          - {field: vehicle_count, op: "<=", value: 120}
        then: {situation: 0}
    default: {situation: -1}

Conditions of one rule are a conjunction; the first matching rule wins.
Comparators are limited to <, <=, >, >= and ==.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import yaml

from .errors import RuleFileError, UnknownFieldError

OPERATORS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
}


@dataclass(frozen=True)
class Condition:
    field: str
    op: str
    value: float

    def holds(self, context: Mapping[str, float]) -> bool:
        if self.field not in context:
            raise UnknownFieldError(f"context has no field {self.field!r}")
        return OPERATORS[self.op](context[self.field], self.value)


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    action: Mapping[str, object]

    def matches(self, context: Mapping[str, float]) -> bool:
        return all(c.holds(context) for c in self.conditions)


@dataclass(frozen=True)
class RuleSet:
    """Ordered rules plus an optional default action."""

    rules: tuple[Rule, ...]
    default: Optional[Mapping[str, object]] = None

    def match(self, context: Mapping[str, float]) -> Optional[Mapping[str, object]]:
        for rule in self.rules:
            if rule.matches(context):
                return rule.action
        return self.default

    def referenced_fields(self) -> set[str]:
        return {c.field for rule in self.rules for c in rule.conditions}


def _parse_condition(entry, path) -> Condition:
    if not isinstance(entry, dict):
        raise RuleFileError(path, "a condition must be a mapping")
    unknown = set(entry) - {"field", "op", "value"}
    if unknown:
        raise RuleFileError(path, f"unknown condition keys: {sorted(unknown)}")
    for key in ("field", "op", "value"):
        if key not in entry:
            raise RuleFileError(path, f"condition is missing {key!r}")
    if not isinstance(entry["field"], str):
        raise RuleFileError(path, "condition field must be a string")
    if entry["op"] not in OPERATORS:
        raise RuleFileError(path, f"op must be one of {sorted(OPERATORS)}")
    value = entry["value"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RuleFileError(path, "condition value must be a number")
    return Condition(entry["field"], entry["op"], value)


def parse_rule_set(text: str) -> RuleSet:
    """Parse the shared rule grammar; actions are returned uninterpreted."""
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise RuleFileError("", f"not a well-formed YAML document: {exc}") from exc
    if not isinstance(document, dict):
        raise RuleFileError("", "rule file must be a mapping")
    unknown = set(document) - {"rules", "default"}
    if unknown:
        raise RuleFileError("", f"unknown keys: {sorted(unknown)}")
    rules_raw = document.get("rules", [])
    if not isinstance(rules_raw, list):
        raise RuleFileError("rules", "expected a list of rules")
    rules = []
    for i, entry in enumerate(rules_raw):
        path = f"rules[{i}]"
        if not isinstance(entry, dict) or set(entry) != {"when", "then"}:
            raise RuleFileError(path, "each rule needs exactly 'when' and 'then'")
        when = entry["when"]
        if not isinstance(when, list) or not when:
            raise RuleFileError(f"{path}.when", "expected a non-empty list of conditions")
        conditions = tuple(
            _parse_condition(c, f"{path}.when[{j}]") for j, c in enumerate(when)
        )
        then = entry["then"]
        if not isinstance(then, dict):
            raise RuleFileError(f"{path}.then", "expected a mapping")
        rules.append(Rule(conditions, then))
    default = document.get("default")
    if default is not None and not isinstance(default, dict):
        raise RuleFileError("default", "expected a mapping")
    return RuleSet(tuple(rules), default)


# ---------------------------------------------------------------------------
# situation rules: action is {situation: <int >= 0>}, default is noise (-1)


@dataclass(frozen=True)
class SituationRules:
    rule_set: RuleSet

    def detect(self, context: Mapping[str, float]) -> int:
        """Situation id of the first matching rule; -1 when none matches."""
        action = self.rule_set.match(context)
        if action is None:
            return -1
        return int(action["situation"])


def parse_situation_rules(text: str, known_fields: Optional[Sequence[str]] = None) -> SituationRules:
    rule_set = parse_rule_set(text)
    for i, rule in enumerate(rule_set.rules):
        action = rule.action
        if set(action) != {"situation"}:
            raise RuleFileError(f"rules[{i}].then", "action must be exactly {situation: <int>}")
        sid = action["situation"]
        if isinstance(sid, bool) or not isinstance(sid, int) or sid < 0:
            raise RuleFileError(f"rules[{i}].then.situation", "situation must be an int >= 0")
    if rule_set.default is not None:
        sid = rule_set.default.get("situation")
        if isinstance(sid, bool) or not isinstance(sid, int) or sid < -1:
            raise RuleFileError("default.situation", "default situation must be an int >= -1")
    if known_fields is not None:
        unknown = rule_set.referenced_fields() - set(known_fields)
        if unknown:
            raise RuleFileError("rules", f"conditions reference unknown fields: {sorted(unknown)}")
    return SituationRules(rule_set)


def load_situation_rules(path, known_fields=None) -> SituationRules:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_situation_rules(fh.read(), known_fields)
