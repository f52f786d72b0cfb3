"""Use-case adapter: observation ingestion, decision retrieval, execution.

Two directions, mirroring how any managed system attaches to the framework:
raw monitoring data is preprocessed into wire observations and posted to the
framework; adaptation decisions are polled by the managed system and turned
into concrete configuration changes. The HTTP surface exists so external
use cases can attach over the network; in-process harnesses call the same
objects directly.

Wire format (JSON, field names exactly as declared in the domain model)::

    POST /observations  {"timestamp": ..., "context": {...},
                         "input": {"strategy": ..., "parameters": {...}},
                         "metrics": {...}}
    -> {"accepted": true|false, "errors": [...]}

    GET /adaptations -> {"seq": N, "strategy": ..., "parameters": {...}}
    GET /health      -> {"status": ..., "observations": N, "decisions": N}
"""

from __future__ import annotations

import socket
import threading
import time
from typing import Optional, Sequence

from fastapi import FastAPI

from .coordination import AdaptationDecision, Framework
from .errors import (
    MalformedBodyError,
    NonMonotonicTimestampError,
    SchemaViolationError,
    SitoptError,
)
from .platoon import INITIAL_METRICS, RawMonitoringRecord, aggregate_metrics, window_context
from .platoon.simulator import PlatoonSimulator
from .errors import EmptyWindowError


class DataPreprocessor:
    """Aggregate raw monitoring records into one wire observation per window.

    Remembers the previous window's metrics so empty aggregates carry values
    forward (the managed system had nothing new to report for them).
    """

    def __init__(self):
        self._previous = INITIAL_METRICS

    def preprocess(self, records: Sequence[RawMonitoringRecord]) -> dict:
        if not records:
            raise EmptyWindowError("a window needs at least one raw record")
        metrics = aggregate_metrics(records, self._previous)
        self._previous = metrics
        last = records[-1]
        return {
            "timestamp": last.timestamp,
            "context": window_context(records),
            "input": {"strategy": last.strategy, "parameters": dict(last.parameters)},
            "metrics": metrics.as_dict(),
        }


class AdaptationExecutor:
    """Turn adaptation decisions into simulator configuration changes."""

    def __init__(self, simulator: PlatoonSimulator):
        self._simulator = simulator

    def execute(self, decision: AdaptationDecision) -> None:
        # raises UnknownStrategyError and leaves the previous config in place
        self._simulator.set_configuration(decision.strategy, decision.parameters)


def build_app(framework: Framework) -> FastAPI:
    """HTTP face of the framework; one app serves one framework instance."""
    app = FastAPI(title="sitopt adapter")
    loop_lock = threading.Lock()
    app.state.framework = framework

    @app.post("/observations")
    def ingest_observation(body: dict):
        from .store import observation_from_mapping

        try:
            obs = observation_from_mapping(body)
            with loop_lock:
                decision = framework.on_observation(obs)
        except SchemaViolationError as exc:
            return {"accepted": False, "errors": list(exc.errors)}
        except (MalformedBodyError, NonMonotonicTimestampError) as exc:
            return {"accepted": False, "errors": [str(exc)]}
        payload = {"accepted": True, "errors": []}
        if decision is not None:
            payload["decision_seq"] = len(framework.decision_log)
        return payload

    @app.get("/adaptations")
    def latest_adaptation():
        log = framework.decision_log
        if log:
            decision = log[-1].decision
            seq = len(log)
        else:
            decision = framework.fallback_rules.default_decision
            seq = 0
        return {"seq": seq, "strategy": decision.strategy, "parameters": dict(decision.parameters)}

    @app.get("/health")
    def health():
        return {
            "status": "running",
            "observations": len(framework.store),
            "decisions": len(framework.decision_log),
        }

    return app


class AdapterServer:
    """Run the adapter app on a real socket in a background thread."""

    def __init__(self, app: FastAPI, host: str = "127.0.0.1", port: int = 0):
        import uvicorn

        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))
        self._sock = sock
        self.host, self.port = sock.getsockname()
        config = uvicorn.Config(app, log_level="warning", access_log=False)
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(
            target=self._server.run, kwargs={"sockets": [sock]}, daemon=True
        )

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def __enter__(self):
        self._thread.start()
        deadline = time.monotonic() + 10.0
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("adapter server did not start")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10.0)
        return False
