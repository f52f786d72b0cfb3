"""Platooning performance metrics over an observation window.

All four metrics are normalized to [0, 1]:

* throughput: vehicles that exited so far / vehicles that would have exited
  so far under free flow (a run-cumulative ratio; per-window exit counts are
  too small at desk scale to divide meaningfully);
* time_loss: 1 - mean relative travel-time excess of vehicles exiting in
  the window;
* platoon_utilization: pooled fraction of platooning-capable vehicle-time
  actually spent in a platoon during the window;
* platoon_time: mean fraction of an exited capable vehicle's trip spent
  platooned.

A metric whose denominator is empty in the window carries the previous
window's value forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence


@dataclass(frozen=True)
class TripRecord:
    spawn_time: float
    exit_time: float
    free_flow_time: float
    time_in_platoon: float
    capable: bool

    @property
    def travel_time(self) -> float:
        return self.exit_time - self.spawn_time


@dataclass(frozen=True)
class RawMonitoringRecord:
    """Snapshot emitted by the use case once per record interval."""

    timestamp: float
    vehicle_count: int
    car_count: int
    car_speed_sum_kmh: float
    capable_count: int
    platooned_count: int
    total_exited: int  # run-cumulative
    total_expected_exits: int  # run-cumulative, free-flow expectation
    trips: tuple[TripRecord, ...]
    strategy: str
    parameters: Mapping[str, float]


@dataclass(frozen=True)
class MetricsWindow:
    throughput: float
    time_loss: float
    platoon_utilization: float
    platoon_time: float

    def as_dict(self) -> dict:
        return {
            "throughput": self.throughput,
            "time_loss": self.time_loss,
            "platoon_utilization": self.platoon_utilization,
            "platoon_time": self.platoon_time,
        }


INITIAL_METRICS = MetricsWindow(1.0, 1.0, 0.0, 0.0)


def _clamp(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def aggregate_metrics(
    records: Sequence[RawMonitoringRecord], previous: MetricsWindow
) -> MetricsWindow:
    trips = [t for r in records for t in r.trips]
    expected = records[-1].total_expected_exits
    exited = records[-1].total_exited
    capable_time = sum(r.capable_count for r in records)
    platooned_time = sum(r.platooned_count for r in records)
    capable_trips = [t for t in trips if t.capable]

    throughput = _clamp(exited / expected) if expected > 0 else previous.throughput
    if trips:
        excess = sum(
            (t.travel_time - t.free_flow_time) / t.free_flow_time for t in trips
        ) / len(trips)
        time_loss = _clamp(1.0 - excess)
    else:
        time_loss = previous.time_loss
    utilization = (
        _clamp(platooned_time / capable_time) if capable_time > 0 else previous.platoon_utilization
    )
    if capable_trips:
        platoon_time = _clamp(
            sum(t.time_in_platoon / t.travel_time for t in capable_trips) / len(capable_trips)
        )
    else:
        platoon_time = previous.platoon_time
    return MetricsWindow(throughput, time_loss, utilization, platoon_time)


def window_context(records: Sequence[RawMonitoringRecord]) -> dict:
    """Context fields of an observation window: the on-road vehicle count at
    the window end and the mean car speed (km/h) over the window."""
    car_count = sum(r.car_count for r in records)
    speed = sum(r.car_speed_sum_kmh for r in records) / car_count if car_count else 0.0
    return {"vehicle_count": int(records[-1].vehicle_count), "avg_car_speed": float(speed)}
