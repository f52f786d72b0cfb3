"""Scenario files for the desk-scale highway segment.

A scenario fixes segment geometry, traffic composition and the spawn-rate
profile over the simulated horizon. Rates are hourly knots (vehicles/hour)
interpolated linearly in between.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError, ConfigNotFoundError


@dataclass(frozen=True)
class Scenario:
    name: str
    duration_hours: float
    step_s: float
    observation_window_s: float
    record_interval_s: float
    segment_length_m: float
    lanes: int
    platooning_share: float
    truck_share: float
    car_speed_limit_kmh: float
    truck_speed_limit_kmh: float
    spawn_rates: tuple[float, ...]  # hourly knots, len >= 2
    seed: int = 0

    @property
    def duration_s(self) -> float:
        return self.duration_hours * 3600.0

    def rate_at(self, t_seconds: float) -> float:
        """Linearly interpolated spawn rate (veh/h) at simulation time t."""
        hours = min(max(t_seconds / 3600.0, 0.0), self.duration_hours)
        knots = len(self.spawn_rates) - 1
        x = hours / self.duration_hours * knots
        i = min(int(x), knots - 1)
        frac = x - i
        return self.spawn_rates[i] * (1.0 - frac) + self.spawn_rates[i + 1] * frac


_REQUIRED = (
    "name",
    "duration_hours",
    "segment_length_m",
    "lanes",
    "platooning_share",
    "truck_share",
    "car_speed_limit_kmh",
    "truck_speed_limit_kmh",
    "spawn_rates",
)
_DEFAULTS = {
    "step_s": 0.5,
    "observation_window_s": 30.0,
    "record_interval_s": 1.0,
    "seed": 0,
}


def parse_scenario(text: str) -> Scenario:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError("", "scenario file must be a mapping")
    unknown = set(data) - set(_REQUIRED) - set(_DEFAULTS)
    if unknown:
        raise ConfigError("", f"unknown scenario keys: {sorted(unknown)}")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigError(key, "required scenario key is missing")
    rates = data["spawn_rates"]
    if not isinstance(rates, list) or len(rates) < 2 or any(r < 0 for r in rates):
        raise ConfigError("spawn_rates", "expected a list of >= 2 non-negative rates")
    merged = {**_DEFAULTS, **data}
    return Scenario(
        name=str(merged["name"]),
        duration_hours=float(merged["duration_hours"]),
        step_s=float(merged["step_s"]),
        observation_window_s=float(merged["observation_window_s"]),
        record_interval_s=float(merged["record_interval_s"]),
        segment_length_m=float(merged["segment_length_m"]),
        lanes=int(merged["lanes"]),
        platooning_share=float(merged["platooning_share"]),
        truck_share=float(merged["truck_share"]),
        car_speed_limit_kmh=float(merged["car_speed_limit_kmh"]),
        truck_speed_limit_kmh=float(merged["truck_speed_limit_kmh"]),
        spawn_rates=tuple(float(r) for r in rates),
        seed=int(merged["seed"]),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigNotFoundError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(encoding="utf-8"))
