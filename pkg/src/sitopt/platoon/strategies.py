"""Platooning coordination strategies and their tunable parameters.

Three exchangeable strategies decide which candidate an advertising vehicle
joins:

* BestDistance: nearest capable candidate within a fixed 500 m window whose
  desired-speed difference stays below ``max_speed_difference``;
* BestVelocity: the candidate with the smallest desired-speed difference
  within the configurable front/back search window;
* BestDistanceAndLane: nearest candidate in the fixed window (no speed
  gate), then the whole platoon moves to the highest lane whose speed
  threshold its cruise speed satisfies.
"""

from __future__ import annotations

import numpy as np

from ..errors import UnknownStrategyError

BEST_DISTANCE = "BestDistance"
BEST_VELOCITY = "BestVelocity"
BEST_DISTANCE_AND_LANE = "BestDistanceAndLane"
STRATEGIES = (BEST_DISTANCE, BEST_VELOCITY, BEST_DISTANCE_AND_LANE)

# BestDistance and BestDistanceAndLane have no search-distance parameters;
# they scan a fixed 500 m window (250 m each way) around the advertiser.
FIXED_SEARCH_HALF_WINDOW_M = 250.0

PARAMETERS_BY_STRATEGY = {
    BEST_DISTANCE: ("advertising_duration", "max_speed_difference"),
    BEST_VELOCITY: ("advertising_duration", "search_distance_front", "search_distance_back"),
    BEST_DISTANCE_AND_LANE: (
        "advertising_duration",
        "speed_threshold_lane2",
        "speed_threshold_lane3",
        "speed_threshold_lane4",
    ),
}


def check_strategy(name: str) -> str:
    if name not in STRATEGIES:
        raise UnknownStrategyError(f"unknown strategy {name!r}")
    return name


def search_window(strategy: str, params) -> tuple[float, float]:
    """(back, front) search distances in meters."""
    if strategy == BEST_VELOCITY:
        return float(params["search_distance_back"]), float(params["search_distance_front"])
    return FIXED_SEARCH_HALF_WINDOW_M, FIXED_SEARCH_HALF_WINDOW_M


def pick_candidate(strategy, params, adv_pos, adv_desired_ms, cand_pos, cand_desired_ms):
    """Index into the candidate arrays of the partner to join, or -1.

    Desired speeds are m/s; ``max_speed_difference`` is km/h like the
    reported vehicle speeds.
    """
    back, front = search_window(strategy, params)
    in_range = (cand_pos >= adv_pos - back) & (cand_pos <= adv_pos + front)
    if not in_range.any():
        return -1
    dv_kmh = np.abs(cand_desired_ms - adv_desired_ms) * 3.6
    distance = np.abs(cand_pos - adv_pos)

    if strategy == BEST_DISTANCE:
        ok = in_range & (dv_kmh <= float(params["max_speed_difference"]))
        if not ok.any():
            return -1
        masked = np.where(ok, distance, np.inf)
        return int(np.argmin(masked))
    if strategy == BEST_VELOCITY:
        masked = np.where(in_range, dv_kmh, np.inf)
        best = masked.min()
        ties = in_range & (masked == best)
        tie_dist = np.where(ties, distance, np.inf)
        return int(np.argmin(tie_dist))
    if strategy == BEST_DISTANCE_AND_LANE:
        masked = np.where(in_range, distance, np.inf)
        return int(np.argmin(masked))
    raise UnknownStrategyError(f"unknown strategy {strategy!r}")


def lane_for_cruise_speed(cruise_kmh: float, params, n_lanes: int) -> int:
    """Highest lane whose speed threshold the cruise speed satisfies."""
    lane = 1
    for i, key in enumerate(
        ("speed_threshold_lane2", "speed_threshold_lane3", "speed_threshold_lane4")
    ):
        if cruise_kmh >= float(params[key]):
            lane = i + 2
    return min(lane, n_lanes)
