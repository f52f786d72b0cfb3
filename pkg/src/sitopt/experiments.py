"""Experiment harness: seeded closed-loop runs and comparison reports.

A run cell is (scenario x detection x trigger) for the framework, or
(scenario x fixed strategy) for a baseline; each cell runs one simulation
per seed. Baselines bypass the framework entirely. Reports are pure
functions of the written CSVs: per-cell mean hypervolume area-under-curve
series, a static plot, and a metric summary table.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .adapter import AdaptationExecutor, DataPreprocessor
from .coordination import Framework, load_fallback_rules
from .domain import DomainModel, domain_model_from_mapping, load_domain_model
from .errors import ConfigError, ConfigNotFoundError, IncompatibleRunsError, SitoptError
from .platoon import PlatoonSimulator, Scenario, load_scenario
from .rules import load_situation_rules
from .store import ObservationStore, observation_from_mapping

import yaml

FRAMEWORK_DETECTIONS = ("RuleBased", "OPTICS", "DBSCAN", "kMeans")
TRIGGERS = ("hypervolume", "threshold")
BASELINES = ("BestDistance", "BestVelocity", "Rules")

# fixed-strategy baseline configurations
BASELINE_CONFIGS = {
    "BestDistance": {"advertising_duration": 10, "max_speed_difference": 35.0},
    "BestVelocity": {
        "advertising_duration": 10,
        "search_distance_front": 600,
        "search_distance_back": 250,
    },
}

# settings applied when the CLI overrides the detection algorithm; eps and
# the OPTICS sizes are in standardized context units / observation counts
DETECTION_OVERRIDES = {
    "RuleBased": {"rules": "situation_rules.yaml"},
    "OPTICS": {"min_samples": 45, "min_cluster_size": 45},
    "DBSCAN": {"min_samples": 45, "eps": 0.5},
    "kMeans": {"k_min": 1, "k_max": 5, "seed": 0},
}


@dataclass(frozen=True)
class ExperimentPlan:
    ddm_path: Path
    scenario_path: Path
    seeds: tuple[int, ...]
    detection: Optional[str] = None  # framework cell
    trigger: Optional[str] = None
    baseline: Optional[str] = None  # baseline cell
    out_dir: Path = Path("runs")

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if (self.baseline is None) == (self.detection is None):
            raise ConfigError("", "give either detection+trigger or a baseline")
        if self.baseline is None:
            if self.detection not in FRAMEWORK_DETECTIONS:
                raise ConfigError("detection", f"unknown detection {self.detection!r}")
            if self.trigger not in TRIGGERS:
                raise ConfigError("trigger", f"unknown trigger {self.trigger!r}")
        elif self.baseline not in BASELINES:
            raise ConfigError("baseline", f"unknown baseline {self.baseline!r}")

    def cell_name(self, scenario_name: str) -> str:
        if self.baseline is not None:
            return f"{scenario_name}_baseline_{self.baseline}"
        return f"{scenario_name}_{self.detection}_{self.trigger}"


def _ddm_with_overrides(ddm_path: Path, detection: str, trigger: str) -> DomainModel:
    mapping = yaml.safe_load(ddm_path.read_text(encoding="utf-8"))
    det = mapping["context"]["situation_detection_settings"]
    if det.get("algorithm") != detection:
        det["algorithm"] = detection
        det["settings"] = dict(DETECTION_OVERRIDES[detection])
    mapping["parameter_options"]["strategy_selection_settings"]["method"] = trigger
    return domain_model_from_mapping(mapping)


def run_closed_loop(simulator: PlatoonSimulator, framework: Framework, n_windows: int) -> None:
    """Drive the full loop in process: simulate, preprocess, decide, execute."""
    preprocessor = DataPreprocessor()
    executor = AdaptationExecutor(simulator)
    executor.execute(framework.fallback_rules.default_decision)
    for _ in range(n_windows):
        records = simulator.run_window()
        wire = preprocessor.preprocess(records)
        decision = framework.on_observation(observation_from_mapping(wire))
        if decision is not None:
            executor.execute(decision)


def run_closed_loop_http(
    simulator: PlatoonSimulator, base_url: str, n_windows: int, client=None
) -> None:
    """Same loop, but observations and decisions travel over the HTTP API."""
    import httpx

    own_client = client is None
    if own_client:
        client = httpx.Client(base_url=base_url, timeout=60.0)
    try:
        preprocessor = DataPreprocessor()
        executor = AdaptationExecutor(simulator)
        from .coordination import AdaptationDecision

        last = client.get("/adaptations").json()
        seq = last["seq"]
        executor.execute(AdaptationDecision(last["strategy"], last["parameters"]))
        for _ in range(n_windows):
            records = simulator.run_window()
            wire = preprocessor.preprocess(records)
            ack = client.post("/observations", json=wire).json()
            if not ack["accepted"]:
                raise SitoptError(f"observation rejected: {ack['errors']}")
            latest = client.get("/adaptations").json()
            if latest["seq"] > seq:
                seq = latest["seq"]
                executor.execute(AdaptationDecision(latest["strategy"], latest["parameters"]))
    finally:
        if own_client:
            client.close()


def _run_baseline_loop(
    simulator: PlatoonSimulator,
    store: ObservationStore,
    baseline: str,
    fallback_rules,
    n_windows: int,
) -> list:
    from .coordination import AdaptationDecision

    preprocessor = DataPreprocessor()
    executor = AdaptationExecutor(simulator)
    decisions = []
    if baseline == "Rules":
        decision = fallback_rules.default_decision
    else:
        decision = AdaptationDecision(baseline, BASELINE_CONFIGS[baseline])
    executor.execute(decision)
    decisions.append((0, decision))
    for w in range(n_windows):
        records = simulator.run_window()
        wire = preprocessor.preprocess(records)
        obs = observation_from_mapping(wire)
        store.ingest(obs)
        if baseline == "Rules":
            new = fallback_rules.decide(obs.context)
            if new != decision:
                decision = new
                decisions.append((w + 1, decision))
            executor.execute(decision)
    return decisions


def run(plan: ExperimentPlan) -> Path:
    """Execute every seed of one cell; returns the cell directory."""
    ddm_path = Path(plan.ddm_path)
    scenario_path = Path(plan.scenario_path)
    for path in (ddm_path, scenario_path):
        if not path.exists():
            raise ConfigNotFoundError(f"configuration file not found: {path}")
    scenario = load_scenario(scenario_path)
    n_windows = max(1, round(scenario.duration_s / scenario.observation_window_s))
    cell = plan.cell_name(scenario.name)
    cell_dir = Path(plan.out_dir) / cell
    cell_dir.mkdir(parents=True, exist_ok=True)

    metric_rows = []
    for seed in plan.seeds:
        run_dir = cell_dir / f"seed_{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        if plan.baseline is None:
            model = _ddm_with_overrides(ddm_path, plan.detection, plan.trigger)
            store = _run_framework_seed(model, ddm_path, scenario, seed, run_dir)
        else:
            model = load_domain_model(ddm_path)
            store = _run_baseline_seed(model, ddm_path, scenario, plan.baseline, seed, run_dir)
        store.export_csv(run_dir / "observations.csv")
        means = _metric_means(store, model)
        metric_rows.append({"seed": seed, **means})
        meta = {
            "cell": cell,
            "scenario": scenario.name,
            "detection": plan.detection,
            "trigger": plan.trigger,
            "baseline": plan.baseline,
            "seed": seed,
            "window_s": scenario.observation_window_s,
            "n_windows": n_windows,
            "metric_means": means,
        }
        (run_dir / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))

    summary = _summarize(metric_rows, model)
    (cell_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return cell_dir


def _run_framework_seed(model, ddm_path, scenario, seed, run_dir) -> ObservationStore:
    base = ddm_path.parent
    fallback = load_fallback_rules(base / model.use_case.fallback_rules, model)
    situation_rules = None
    detection = model.context.situation_detection_settings
    if detection.algorithm == "RuleBased":
        situation_rules = load_situation_rules(
            base / str(detection.require("rules")), known_fields=list(model.context.data)
        )
    framework = Framework(
        model,
        fallback,
        situation_rules=situation_rules,
        seed=seed,
        store_log_path=run_dir / "observations.jsonl",
    )
    simulator = PlatoonSimulator(scenario, seed=seed)
    n_windows = max(1, round(scenario.duration_s / scenario.observation_window_s))
    try:
        run_closed_loop(simulator, framework, n_windows)
    finally:
        framework.store.close()
    framework.export_decisions_csv(run_dir / "decisions.csv")
    framework.optimizer.save_snapshots(run_dir / "surrogates")
    return framework.store


def _run_baseline_seed(model, ddm_path, scenario, baseline, seed, run_dir) -> ObservationStore:
    fallback = load_fallback_rules(ddm_path.parent / model.use_case.fallback_rules, model)
    store = ObservationStore(model, log_path=run_dir / "observations.jsonl")
    simulator = PlatoonSimulator(scenario, seed=seed)
    n_windows = max(1, round(scenario.duration_s / scenario.observation_window_s))
    try:
        decisions = _run_baseline_loop(simulator, store, baseline, fallback, n_windows)
    finally:
        store.close()
    with open(run_dir / "decisions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window", "strategy", "parameters"])
        for window, decision in decisions:
            writer.writerow(
                [window, decision.strategy, json.dumps(dict(decision.parameters), sort_keys=True)]
            )
    return store


def _metric_means(store: ObservationStore, model: DomainModel) -> dict:
    rows = store.query()
    means = {}
    for name in model.performance_measures:
        means[name] = float(np.mean([r.base.metrics[name] for r in rows])) if rows else 0.0
    means["hypervolume"] = float(np.mean([r.hypervolume for r in rows])) if rows else 0.0
    return means


def _summarize(metric_rows: Sequence[dict], model: DomainModel) -> dict:
    names = list(model.performance_measures) + ["hypervolume"]
    out = {"seeds": [row["seed"] for row in metric_rows]}
    for name in names:
        values = np.array([row[name] for row in metric_rows], dtype=float)
        out[name] = {"mean": float(values.mean()), "std": float(values.std())}
    return out


# ---------------------------------------------------------------------------
# reporting


def _load_run_series(run_dir: Path) -> tuple[np.ndarray, np.ndarray, dict]:
    meta = json.loads((run_dir / "meta.json").read_text())
    times, hvs = [], []
    with open(run_dir / "observations.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            times.append(float(row["timestamp"]))
            hvs.append(float(row["hypervolume"]))
    return np.array(times), np.array(hvs), meta


def hv_auc_series(hvs: np.ndarray, window_s: float) -> np.ndarray:
    """Cumulative integral of the hypervolume score over observation time;
    each observation's score covers its own window."""
    return np.cumsum(hvs * window_s)


def report(run_dirs: Sequence[Path], out_dir: Path) -> Path:
    """Aggregate completed cells into AUC curves, a plot, and a summary table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells: dict[str, list[tuple[np.ndarray, np.ndarray, dict]]] = {}
    for cell_dir in run_dirs:
        cell_dir = Path(cell_dir)
        seed_dirs = sorted(cell_dir.glob("seed_*"))
        if not seed_dirs:
            raise ConfigNotFoundError(f"no seed runs under {cell_dir}")
        for run_dir in seed_dirs:
            series = _load_run_series(run_dir)
            cells.setdefault(series[2]["cell"], []).append(series)

    auc_table: dict[str, np.ndarray] = {}
    time_axis = None
    for cell, runs in sorted(cells.items()):
        lengths = {len(hvs) for _, hvs, _ in runs}
        if len(lengths) != 1:
            raise IncompatibleRunsError(f"cell {cell}: runs have different lengths {lengths}")
        window = {meta["window_s"] for _, _, meta in runs}
        if len(window) != 1:
            raise IncompatibleRunsError(f"cell {cell}: runs have different windows {window}")
        window_s = window.pop()
        aucs = np.stack([hv_auc_series(hvs, window_s) for _, hvs, _ in runs])
        mean_auc = aucs.mean(axis=0)
        auc_table[cell] = mean_auc
        cell_times = runs[0][0]
        if time_axis is None or len(cell_times) == len(time_axis):
            time_axis = cell_times
        with open(out_dir / f"auc_{cell}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "mean_hv_auc"])
            for t, v in zip(cell_times, mean_auc):
                writer.writerow([repr(float(t)), repr(float(v))])

    sizes = {len(v) for v in auc_table.values()}
    if len(sizes) != 1:
        raise IncompatibleRunsError(f"cells have different run lengths: {sizes}")

    _plot_auc(time_axis, auc_table, out_dir / "auc.png")
    _write_summary(cells, out_dir / "summary.csv")
    return out_dir


def _plot_auc(time_axis, auc_table, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 5))
    for cell, series in sorted(auc_table.items()):
        style = {"linestyle": "--", "color": "gray"} if "baseline" in cell else {}
        ax.plot(time_axis / 3600.0, series, label=cell, **style)
    ax.set_xlabel("simulation time [h]")
    ax.set_ylabel("mean hypervolume AUC")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _write_summary(cells, path):
    metric_names = None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for cell, runs in sorted(cells.items()):
            per_metric: dict[str, list[float]] = {}
            for _, _, meta in runs:
                for name, value in meta["metric_means"].items():
                    per_metric.setdefault(name, []).append(value)
            if metric_names is None:
                metric_names = sorted(per_metric)
                writer.writerow(
                    ["cell"] + [f"{m}_{stat}" for m in metric_names for stat in ("mean", "std")]
                )
            row = [cell]
            for name in metric_names:
                values = np.array(per_metric[name])
                row += [repr(float(values.mean())), repr(float(values.std()))]
            writer.writerow(row)
