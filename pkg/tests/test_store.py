import math

import numpy as np
import pytest

from sitopt import errors
from sitopt.domain import PerformanceMeasureSpec
from sitopt.store import (
    Observation,
    ObservationStore,
    StrategyInput,
    compute_hypervolume,
    observation_from_mapping,
    observation_to_mapping,
)

FOUR_HIGHER = {
    name: PerformanceMeasureSpec(name, "double", True, -0.1)
    for name in ("throughput", "time_loss", "platoon_utilization", "platoon_time")
}


class TestHypervolume:
    def test_best_distance_row_product(self):
        metrics = {
            "throughput": 0.9952,
            "time_loss": 0.8992,
            "platoon_utilization": 0.6251,
            "platoon_time": 0.4908,
        }
        # oracle: independent product of the oriented gaps (v + 0.1)
        assert compute_hypervolume(metrics, FOUR_HIGHER) == pytest.approx(
            0.4687963830396672, abs=1e-9
        )

    def test_mixed_orientation_product(self):
        specs = {
            "pm1": PerformanceMeasureSpec("pm1", "int", True, -1),
            "pm2": PerformanceMeasureSpec("pm2", "double", False, 100.0),
        }
        # (5 - (-1)) * (100 - 20) computed by hand
        assert compute_hypervolume({"pm1": 5, "pm2": 20.0}, specs) == pytest.approx(
            480.0, abs=1e-9
        )

    def test_value_at_reference_gives_zero(self):
        specs = {"m": PerformanceMeasureSpec("m", "double", True, 0.5)}
        assert compute_hypervolume({"m": 0.5}, specs) == 0.0

    def test_key_mismatch(self):
        with pytest.raises(errors.KeyMismatchError):
            compute_hypervolume({"throughput": 1.0}, FOUR_HIGHER)

    def test_non_finite_value(self):
        specs = {"m": PerformanceMeasureSpec("m", "double", True, 0.0)}
        with pytest.raises(errors.NonFiniteValueError):
            compute_hypervolume({"m": float("nan")}, specs)

    def test_zero_iff_dominated_and_gap_scaling(self):
        # 1000 random instances: zero exactly when some oriented gap <= 0,
        # and scaling one positive gap by c scales the volume by exactly c
        rng = np.random.default_rng(42)
        for _ in range(1000):
            k = int(rng.integers(1, 5))
            higher = rng.random(k) < 0.5
            refs = rng.normal(0, 1, k)
            specs = {
                f"m{i}": PerformanceMeasureSpec(f"m{i}", "double", bool(higher[i]), refs[i])
                for i in range(k)
            }
            values = refs + np.where(higher, 1, -1) * rng.normal(0.5, 1.0, k)
            metrics = {f"m{i}": float(values[i]) for i in range(k)}
            gaps = np.where(higher, values - refs, refs - values)
            hv = compute_hypervolume(metrics, specs)
            if (gaps <= 0).any():
                assert hv == 0.0
            else:
                assert hv == pytest.approx(float(np.prod(gaps)), rel=1e-12)
                # scale one gap by c > 1
                i = int(rng.integers(k))
                c = 1.0 + float(rng.random())
                scaled = dict(metrics)
                scaled[f"m{i}"] = float(refs[i] + (1 if higher[i] else -1) * c * gaps[i])
                assert compute_hypervolume(scaled, specs) == pytest.approx(c * hv, rel=1e-9)


def _obs(model, t, count, speed=100.0, strategy="BestVelocity", advert=10, front=600, back=250):
    return Observation(
        timestamp=t,
        context={"vehicle_count": count, "avg_car_speed": speed},
        input=StrategyInput(
            strategy,
            {
                "advertising_duration": advert,
                "search_distance_front": front,
                "search_distance_back": back,
            },
        ),
        metrics={
            "throughput": 0.99,
            "time_loss": 0.95,
            "platoon_utilization": 0.7,
            "platoon_time": 0.6,
        },
    )


class TestIngest:
    def test_first_observation(self, desk_model):
        store = ObservationStore(desk_model)
        rec = store.ingest(_obs(desk_model, 0.0, 10))
        assert rec.config_active_for == 0.0
        assert rec.situation == -1
        assert rec.hypervolume == pytest.approx(
            compute_hypervolume(rec.base.metrics, desk_model.performance_measures)
        )

    def test_active_duration_accumulates_on_same_input(self, desk_model):
        store = ObservationStore(desk_model)
        store.ingest(_obs(desk_model, 0.0, 10))
        rec = store.ingest(_obs(desk_model, 30.0, 12))
        assert rec.config_active_for == 30.0
        rec3 = store.ingest(_obs(desk_model, 60.0, 12))
        assert rec3.config_active_for == 60.0

    def test_active_duration_resets_on_changed_parameters(self, desk_model):
        store = ObservationStore(desk_model)
        store.ingest(_obs(desk_model, 0.0, 10))
        rec = store.ingest(_obs(desk_model, 30.0, 12, advert=5))
        assert rec.config_active_for == 0.0

    def test_non_monotonic_timestamp(self, desk_model):
        store = ObservationStore(desk_model)
        store.ingest(_obs(desk_model, 30.0, 10))
        with pytest.raises(errors.NonMonotonicTimestampError):
            store.ingest(_obs(desk_model, 10.0, 10))

    def test_schema_violations_are_collected(self, desk_model):
        store = ObservationStore(desk_model)
        bad = Observation(
            timestamp=0.0,
            context={"vehicle_count": 3.5},  # int field, float value; speed missing
            input=StrategyInput("BestVelocity", {"advertising_duration": 10}),
            metrics={"throughput": 0.5},
        )
        with pytest.raises(errors.SchemaViolationError) as exc:
            store.ingest(bad)
        text = "\n".join(exc.value.errors)
        assert "vehicle_count" in text and "avg_car_speed" in text
        assert "search_distance_front" in text
        assert "time_loss" in text
        assert len(store) == 0  # nothing partially stored


class TestQueryAndRelabel:
    def _filled(self, desk_model):
        store = ObservationStore(desk_model)
        for i, (strategy, advert) in enumerate(
            [("BestVelocity", 10), ("BestDistance", 10), ("BestVelocity", 5), ("BestDistance", 7)]
        ):
            if strategy == "BestDistance":
                obs = Observation(
                    timestamp=float(i * 30),
                    context={"vehicle_count": 10 + i, "avg_car_speed": 100.0},
                    input=StrategyInput(
                        strategy,
                        {"advertising_duration": advert, "max_speed_difference": 35.0},
                    ),
                    metrics=_obs(desk_model, 0, 0).metrics,
                )
            else:
                obs = _obs(desk_model, float(i * 30), 10 + i, advert=advert)
            store.ingest(obs)
        store.assign_situations([0, 0, 1, 2])
        return store

    def test_query_filters_and_order(self, desk_model):
        store = self._filled(desk_model)
        rows = store.query(situation=0, strategy="BestVelocity")
        assert [r.timestamp for r in rows] == [0.0]
        rows = store.query(strategy="BestDistance")
        assert [r.timestamp for r in rows] == [30.0, 90.0]

    def test_query_last_n_underfull(self, desk_model):
        store = self._filled(desk_model)
        assert len(store.query(last_n=10)) == 4
        assert [r.timestamp for r in store.query(last_n=2)] == [60.0, 90.0]

    def test_query_empty_filter_returns_everything(self, desk_model):
        store = self._filled(desk_model)
        assert len(store.query()) == 4

    def test_relabel_identity(self, desk_model):
        store = self._filled(desk_model)
        assert store.relabel({0: 0, 1: 1, 2: 2}) == 0

    def test_relabel_substitution(self, desk_model):
        store = self._filled(desk_model)
        assert store.relabel({1: 2}) == 1
        assert [r.situation for r in store.query()] == [0, 0, 2, 2]

    def test_relabel_swap(self, desk_model):
        store = self._filled(desk_model)
        assert store.relabel({0: 1, 1: 0}) == 3
        assert [r.situation for r in store.query()] == [1, 1, 0, 2]

    def test_query_relabel_commute(self, desk_model):
        a = self._filled(desk_model)
        b = self._filled(desk_model)
        mapping = {0: 5, 1: 0, 2: 2}
        a.relabel(mapping)
        before = b.query(situation=1)
        b.relabel(mapping)
        assert [r.timestamp for r in a.query(situation=0)] == [r.timestamp for r in before]


class TestPersistence:
    def test_replay_rebuilds_store(self, desk_model, tmp_path):
        log = tmp_path / "observations.jsonl"
        store = ObservationStore(desk_model, log_path=log)
        for t in (0.0, 30.0, 60.0):
            store.ingest(_obs(desk_model, t, 10))
        store.close()
        replayed = ObservationStore.replay(desk_model, log)
        assert len(replayed) == 3
        orig, back = store.query(), replayed.query()
        assert [r.hypervolume for r in orig] == [r.hypervolume for r in back]
        assert [r.config_active_for for r in orig] == [r.config_active_for for r in back]

    def test_wire_round_trip(self, desk_model):
        obs = _obs(desk_model, 12.5, 42, speed=101.25)
        assert observation_from_mapping(observation_to_mapping(obs)) == obs

    def test_csv_export(self, desk_model, tmp_path):
        store = ObservationStore(desk_model)
        store.ingest(_obs(desk_model, 0.0, 10))
        out = tmp_path / "obs.csv"
        store.export_csv(out)
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("timestamp,situation,strategy,hypervolume")

    def test_malformed_wire_body(self):
        with pytest.raises(errors.MalformedBodyError):
            observation_from_mapping({"timestamp": 1.0, "context": {}})
