"""Desk-scale managed system: a multi-lane highway segment with platooning.

Vehicles spawn following the scenario profile, drive a simple car-following
rule toward their desired speed and exit at the segment end. Capable
vehicles advertise for platoon partners; the active coordination strategy
decides who joins whom. Platoon followers hold a fixed gap behind their
predecessor and the whole platoon cruises at the slowest member's desired
speed, which is what makes badly matched platoons expensive.

Deterministic for a fixed seed. The per-step vehicle advance runs in the
selected kernel backend.
"""

from __future__ import annotations

import bisect
from collections import deque
from typing import Mapping, Optional

import numpy as np

from .. import _kernels
from ..errors import SimulationDivergedError
from . import strategies as strat
from .metrics import RawMonitoringRecord, TripRecord
from .scenario import Scenario

ACCEL = 2.0  # m/s^2
DECEL = 4.5
MIN_GAP = 4.0  # hard same-lane separation, m
PLATOON_GAP = 10.0  # target intra-platoon gap, m
GAP_KP = 0.5  # platoon gap controller, 1/s
COORDINATION_INTERVAL_S = 1.0
SPAWN_HEADWAY_M = 30.0
MAX_PLATOON_SIZE = 6  # full platoons accept no more members

CAR, TRUCK = 0, 1


class PlatoonSimulator:
    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        self.scenario = scenario
        self._rng = np.random.default_rng(scenario.seed if seed is None else seed)
        self.t = 0.0
        self._step_index = 0
        self._steps_per_coord = max(1, round(COORDINATION_INTERVAL_S / scenario.step_s))

        cap = 1024
        self.pos = np.zeros(cap)
        self.speed = np.zeros(cap)
        self.desired = np.zeros(cap)  # m/s
        self.cruise = np.zeros(cap)  # m/s; platoon-capped target speed
        self.vmax = np.zeros(cap)
        self.lane = np.zeros(cap, dtype=np.int64)
        self.kind = np.zeros(cap, dtype=np.int64)
        self.capable = np.zeros(cap, dtype=bool)
        self.platoon = np.full(cap, -1, dtype=np.int64)
        self.alive = np.zeros(cap, dtype=bool)
        self.spawn_t = np.zeros(cap)
        self.adv_since = np.zeros(cap)
        self.joined_at = np.zeros(cap)
        self.platoon_total = np.zeros(cap)

        self._free: list[int] = list(range(cap - 1, -1, -1))
        self._platoons: dict[int, list[int]] = {}
        self._platoon_lane: dict[int, int] = {}
        self._next_pid = 0
        self._spawn_queue: deque = deque()
        self._ff_exits: list[float] = []

        self.strategy: Optional[str] = None
        self.parameters: dict = {}
        self._pending_config: Optional[tuple[str, dict]] = None

        self._trips: list[TripRecord] = []

        self.total_spawned = 0
        self.total_exited = 0
        self.total_expected_exits = 0

    # -- configuration (the adaptation executor's entry point) ---------------

    def set_configuration(self, strategy: str, parameters: Mapping[str, float]) -> None:
        """Replace strategy and parameters atomically at the next step start."""
        strat.check_strategy(strategy)
        self._pending_config = (strategy, dict(parameters))

    def active_configuration(self) -> tuple[Optional[str], dict]:
        return self.strategy, dict(self.parameters)

    # -- stepping -------------------------------------------------------------

    def on_road(self) -> int:
        return int(self.alive.sum())

    def step(self) -> None:
        if self._pending_config is not None:
            self.strategy, self.parameters = self._pending_config
            self._pending_config = None
        dt = self.scenario.step_s
        self._spawn(dt)
        if self.strategy is not None and self._step_index % self._steps_per_coord == 0:
            self._coordinate()
        _kernels.advance_vehicles(
            self.pos,
            self.speed,
            self.cruise,
            self.vmax,
            self.platoon,
            self.lane,
            self.alive,
            self.scenario.lanes,
            dt,
            ACCEL,
            DECEL,
            MIN_GAP,
            PLATOON_GAP,
            GAP_KP,
        )
        self.t += dt
        self._step_index += 1
        self._handle_exits()

    def run_window(self) -> list[RawMonitoringRecord]:
        """Advance one observation window, emitting raw monitoring records."""
        sc = self.scenario
        steps_per_record = max(1, round(sc.record_interval_s / sc.step_s))
        n_steps = max(1, round(sc.observation_window_s / sc.step_s))
        records = []
        for i in range(n_steps):
            self.step()
            if (i + 1) % steps_per_record == 0:
                records.append(self.collect_record())
        return records

    # -- spawning -------------------------------------------------------------

    def _draw_vehicle(self):
        truck = self._rng.random() < self.scenario.truck_share
        capable = self._rng.random() < self.scenario.platooning_share
        if truck:
            desired_kmh = min(
                self.scenario.truck_speed_limit_kmh,
                max(70.0, self._rng.normal(77.0, 2.0)),
            )
            lane = 1  # trucks keep the rightmost lane
        else:
            desired_kmh = min(
                self.scenario.car_speed_limit_kmh,
                max(85.0, self._rng.normal(107.0, 9.0)),
            )
            lane = int(self._rng.integers(2, self.scenario.lanes + 1))
        return TRUCK if truck else CAR, capable, desired_kmh / 3.6, lane

    def _spawn(self, dt: float) -> None:
        rate = self.scenario.rate_at(self.t)
        for _ in range(self._rng.poisson(rate * dt / 3600.0)):
            self._spawn_queue.append(self._draw_vehicle())
        while self._spawn_queue:
            kind, capable, desired, lane = self._spawn_queue[0]
            in_lane = self.alive & (self.lane == lane)
            if (self.pos[in_lane] < SPAWN_HEADWAY_M).any():
                break
            self._spawn_queue.popleft()
            self._place(kind, capable, desired, lane)

    def _place(self, kind, capable, desired, lane) -> None:
        if not self._free:
            self._grow()
        i = self._free.pop()
        limit = (
            self.scenario.truck_speed_limit_kmh if kind == TRUCK else self.scenario.car_speed_limit_kmh
        ) / 3.6
        self.pos[i] = 0.0
        self.speed[i] = desired
        self.desired[i] = desired
        self.cruise[i] = desired
        self.vmax[i] = limit
        self.lane[i] = lane
        self.kind[i] = kind
        self.capable[i] = capable
        self.platoon[i] = -1
        self.alive[i] = True
        self.spawn_t[i] = self.t
        self.adv_since[i] = self.t
        self.joined_at[i] = 0.0
        self.platoon_total[i] = 0.0
        bisect.insort(self._ff_exits, self.t + self.scenario.segment_length_m / desired)
        self.total_spawned += 1

    def _grow(self) -> None:
        old = len(self.pos)
        new = old * 2
        for name in (
            "pos",
            "speed",
            "desired",
            "cruise",
            "vmax",
            "spawn_t",
            "adv_since",
            "joined_at",
            "platoon_total",
        ):
            arr = getattr(self, name)
            grown = np.zeros(new, dtype=arr.dtype)
            grown[:old] = arr
            setattr(self, name, grown)
        for name, fill in (("lane", 0), ("kind", 0), ("platoon", -1)):
            arr = getattr(self, name)
            grown = np.full(new, fill, dtype=arr.dtype)
            grown[:old] = arr
            setattr(self, name, grown)
        for name in ("capable", "alive"):
            arr = getattr(self, name)
            grown = np.zeros(new, dtype=bool)
            grown[:old] = arr
            setattr(self, name, grown)
        self._free.extend(range(new - 1, old - 1, -1))

    # -- platooning -------------------------------------------------------------

    def _coordinate(self) -> None:
        params = self.parameters
        duration = float(params["advertising_duration"])
        advertisers = np.flatnonzero(
            self.alive
            & self.capable
            & (self.platoon < 0)
            & (self.t - self.adv_since >= duration)
        )
        for a in advertisers:
            if self.platoon[a] >= 0:  # joined earlier in this round
                continue
            cand = np.flatnonzero(self.alive & self.capable)
            cand = cand[cand != a]
            if cand.size:
                open_platoon = [
                    int(self.platoon[c]) < 0
                    or len(self._platoons[int(self.platoon[c])]) < MAX_PLATOON_SIZE
                    for c in cand
                ]
                cand = cand[open_platoon]
            if cand.size == 0:
                continue
            # a platooned candidate travels at its platoon's cruise speed, so
            # speed matching compares against that, not its private desire
            pick = strat.pick_candidate(
                self.strategy,
                params,
                self.pos[a],
                self.desired[a],
                self.pos[cand],
                self.cruise[cand],
            )
            if pick < 0:
                continue
            self._join(int(a), int(cand[pick]))

    def _join(self, joiner: int, partner: int) -> None:
        pid = int(self.platoon[partner])
        if pid < 0:
            pid = self._next_pid
            self._next_pid += 1
            self._platoons[pid] = [partner]
            self._platoon_lane[pid] = int(self.lane[partner])
            self.platoon[partner] = pid
            self.joined_at[partner] = self.t
        members = self._platoons[pid]
        members.append(joiner)
        self.platoon[joiner] = pid
        self.joined_at[joiner] = self.t
        cruise = self.desired[members].min()
        self.cruise[members] = cruise
        if self.strategy == strat.BEST_DISTANCE_AND_LANE:
            self._platoon_lane[pid] = strat.lane_for_cruise_speed(
                cruise * 3.6, self.parameters, self.scenario.lanes
            )
        self.lane[members] = self._platoon_lane[pid]

    def _leave_platoon(self, i: int) -> None:
        pid = int(self.platoon[i])
        if pid < 0:
            return
        self.platoon_total[i] += self.t - self.joined_at[i]
        self.platoon[i] = -1
        self.cruise[i] = self.desired[i]
        self.adv_since[i] = self.t
        members = self._platoons[pid]
        members.remove(i)
        if len(members) == 1:
            self._leave_platoon(members[0])
            return
        if members:
            self.cruise[members] = self.desired[members].min()
        else:
            del self._platoons[pid]
            del self._platoon_lane[pid]

    def _handle_exits(self) -> None:
        exited = np.flatnonzero(self.alive & (self.pos > self.scenario.segment_length_m))
        for i in exited:
            i = int(i)
            self._leave_platoon(i)
            self._trips.append(
                TripRecord(
                    spawn_time=float(self.spawn_t[i]),
                    exit_time=float(self.t),
                    free_flow_time=float(self.scenario.segment_length_m / self.desired[i]),
                    time_in_platoon=float(self.platoon_total[i]),
                    capable=bool(self.capable[i]),
                )
            )
            self.alive[i] = False
            self._free.append(i)
            self.total_exited += 1

    # -- monitoring -------------------------------------------------------------

    def collect_record(self) -> RawMonitoringRecord:
        alive = self.alive
        if not np.isfinite(self.pos[alive]).all():
            raise SimulationDivergedError(f"non-finite vehicle state at t={self.t}")
        cars = alive & (self.kind == CAR)
        cut = bisect.bisect_right(self._ff_exits, self.t)
        self.total_expected_exits += cut
        self._ff_exits = self._ff_exits[cut:]
        trips, self._trips = tuple(self._trips), []
        platooned = alive & (self.platoon >= 0)
        return RawMonitoringRecord(
            timestamp=self.t,
            vehicle_count=int(alive.sum()),
            car_count=int(cars.sum()),
            car_speed_sum_kmh=float(self.speed[cars].sum() * 3.6),
            capable_count=int((alive & self.capable).sum()),
            platooned_count=int(platooned.sum()),
            total_exited=self.total_exited,
            total_expected_exits=self.total_expected_exits,
            trips=trips,
            strategy=self.strategy or "",
            parameters=dict(self.parameters),
        )
