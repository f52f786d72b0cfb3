from .metrics import (
    INITIAL_METRICS,
    MetricsWindow,
    RawMonitoringRecord,
    TripRecord,
    aggregate_metrics,
    window_context,
)
from .scenario import Scenario, load_scenario, parse_scenario
from .simulator import PlatoonSimulator
from .strategies import PARAMETERS_BY_STRATEGY, STRATEGIES

__all__ = [
    "INITIAL_METRICS",
    "MetricsWindow",
    "RawMonitoringRecord",
    "TripRecord",
    "aggregate_metrics",
    "window_context",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "PlatoonSimulator",
    "PARAMETERS_BY_STRATEGY",
    "STRATEGIES",
]
