"""Strategy selection: keep the active adaptation planning strategy or switch.

A switch becomes possible only after the parameter optimizer had a minimum
number of attempts for the (situation, strategy) pair. It is triggered when
enough of the last observations violate the performance expectation, judged
either by the scalar hypervolume against one threshold or by per-measure
thresholds. An untried strategy (in declaration order) is explored first;
once every strategy has been tried, the one with the best recent mean
hypervolume in this situation wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .domain import PerformanceMeasureSpec, StrategySelectionSettings
from .errors import EmptyOrderError, MissingThresholdError, NoHistoryError
from .store import EnrichedObservation


@dataclass
class SelectionContext:
    current_strategy: str
    attempts_done: int
    window: Sequence[EnrichedObservation]  # last window_size observations, this situation
    situation_observations: Sequence[EnrichedObservation]  # all of this situation
    tried: frozenset[str]
    settings: StrategySelectionSettings
    measures: Mapping[str, PerformanceMeasureSpec]


def count_violations(
    window: Sequence[EnrichedObservation],
    settings: StrategySelectionSettings,
    measures: Mapping[str, PerformanceMeasureSpec],
) -> int:
    """Observations in the window performing worse than the expectation.

    Violations are strict: a value exactly at its threshold does not count.
    With the per-measure method one bad measure suffices, however good the
    others are.
    """
    if settings.method == "hypervolume":
        if settings.hypervolume_threshold is None:
            raise MissingThresholdError("hypervolume_threshold is not configured")
        limit = settings.hypervolume_threshold
        return sum(1 for obs in window if obs.hypervolume < limit)

    violations = 0
    for obs in window:
        for name, spec in measures.items():
            if spec.threshold_value is None:
                raise MissingThresholdError(f"measure {name!r} has no threshold_value")
            value = obs.base.metrics[name]
            worse = value < spec.threshold_value if spec.higher_is_better else value > spec.threshold_value
            if worse:
                violations += 1
                break
    return violations


def best_historical_strategy(
    observations: Sequence[EnrichedObservation],
    window_size: int,
    strategy_order: Sequence[str],
) -> str:
    """Strategy with the highest mean hypervolume over its own most recent
    (at most ``window_size``) observations; ties go to the earliest strategy
    in declaration order."""
    if not observations:
        raise NoHistoryError("no observations for this situation")
    recent: dict[str, list[float]] = {}
    for obs in observations:
        recent.setdefault(obs.strategy, []).append(obs.hypervolume)
    best_name = None
    best_mean = -1.0
    for name in strategy_order:
        scores = recent.get(name)
        if not scores:
            continue
        mean = sum(scores[-window_size:]) / len(scores[-window_size:])
        if mean > best_mean:
            best_name, best_mean = name, mean
    if best_name is None:
        raise NoHistoryError("no candidate strategy has observations in this situation")
    return best_name


def select(ctx: SelectionContext, strategy_order: Sequence[str]) -> str:
    """Decide which strategy the next adaptation should run.

    Underfull windows never trigger a switch: the violation budget is
    calibrated against a full window.
    """
    if not strategy_order:
        raise EmptyOrderError("no strategies to select from")
    settings = ctx.settings
    if ctx.attempts_done < settings.min_optimization_attempts:
        return ctx.current_strategy
    if len(ctx.window) < settings.window_size:
        return ctx.current_strategy
    window = list(ctx.window)[-settings.window_size:]
    if count_violations(window, settings, ctx.measures) < settings.threshold_exceeds:
        return ctx.current_strategy
    for name in strategy_order:
        if name not in ctx.tried:
            return name
    return best_historical_strategy(
        ctx.situation_observations, settings.window_size, strategy_order
    )
