"""Per-(situation, strategy) Bayesian optimization of strategy parameters.

Each (situation, strategy) pair owns a surrogate: a Gaussian process with a
Matern-5/2 kernel over the unit-cube encoding of the tunable parameters,
maximizing the scalar hypervolume score. Proposals warm-start from the
active configuration, space-fill the first rounds with scrambled Sobol
points and then maximize expected improvement over a Sobol candidate set
plus local perturbations of the incumbent.

Everything is deterministic for a fixed base seed: the random streams are
derived from (seed, situation, strategy, number of evaluations).
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import ndtr
from scipy.stats import qmc

from .domain import ParameterOptionSpec
from .errors import NoParametersError

N_INIT = 3  # evaluations before the surrogate takes over
N_CANDIDATES = 512
N_PERTURBATIONS = 8
MAX_TRAIN = 160  # surrogate training window (most recent evaluations)
REFIT_EVERY = 25  # full hyperparameter refits, in evaluations
JITTER = 1e-6

Setting = dict


# ---------------------------------------------------------------------------
# parameter encoding


def encode_setting(setting: Mapping[str, float], specs: Sequence[ParameterOptionSpec]):
    u = np.empty(len(specs))
    for i, spec in enumerate(specs):
        u[i] = (setting[spec.name] - spec.min) / (spec.max - spec.min)
    return u


def decode_point(u, specs: Sequence[ParameterOptionSpec]) -> Setting:
    setting = {}
    for i, spec in enumerate(specs):
        value = spec.min + float(np.clip(u[i], 0.0, 1.0)) * (spec.max - spec.min)
        if spec.data_type == "int":
            setting[spec.name] = int(min(max(round(value), spec.min), spec.max))
        else:
            setting[spec.name] = float(value)
    return setting


def midpoint_setting(specs: Sequence[ParameterOptionSpec]) -> Setting:
    return decode_point(np.full(len(specs), 0.5), specs)


def validate_setting(setting: Mapping[str, float], specs: Sequence[ParameterOptionSpec]) -> None:
    names = {s.name for s in specs}
    if set(setting) != names:
        raise ValueError(f"setting keys {sorted(setting)} do not match specs {sorted(names)}")
    for spec in specs:
        value = setting[spec.name]
        if not spec.min <= value <= spec.max:
            raise ValueError(f"{spec.name}={value!r} outside [{spec.min}, {spec.max}]")
        if spec.data_type == "int" and value != int(value):
            raise ValueError(f"{spec.name}={value!r} must be integral")


# ---------------------------------------------------------------------------
# Gaussian process surrogate


def _matern52(sq_dists, lengthscale):
    r = np.sqrt(np.maximum(sq_dists, 0.0)) / lengthscale
    s5r = math.sqrt(5.0) * r
    return (1.0 + s5r + (5.0 / 3.0) * r * r) * np.exp(-s5r)


def _cross_sq_dists(A, B):
    return ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)


class _GP:
    """Noiseless GP with constant (zero, after normalization) mean."""

    def __init__(self, lengthscale: float, signal_var: float):
        self.lengthscale = lengthscale
        self.signal_var = signal_var
        self._X = None
        self._chol = None
        self._alpha = None

    def fit(self, X, y):
        n = X.shape[0]
        K = self.signal_var * _matern52(_cross_sq_dists(X, X), self.lengthscale)
        jitter = JITTER
        while True:
            try:
                chol = linalg.cholesky(K + jitter * np.eye(n), lower=True)
                break
            except linalg.LinAlgError:
                jitter *= 10.0
                if jitter > 1e-2:
                    raise
        self._X = X
        self._chol = chol
        self._alpha = linalg.cho_solve((chol, True), y)
        return self

    def log_marginal_likelihood(self, y):
        n = y.shape[0]
        return float(
            -0.5 * y @ self._alpha
            - np.log(np.diag(self._chol)).sum()
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    def predict(self, Xq):
        Kq = self.signal_var * _matern52(_cross_sq_dists(Xq, self._X), self.lengthscale)
        mean = Kq @ self._alpha
        v = linalg.solve_triangular(self._chol, Kq.T, lower=True)
        var = self.signal_var - (v * v).sum(axis=0)
        return mean, np.sqrt(np.maximum(var, 0.0))


_LENGTHSCALE_GRID = np.geomspace(0.05, 2.0, 8)
_SIGNAL_GRID = (0.5, 1.0, 2.0)


def _fit_hyperparams(X, y):
    """Maximize the log marginal likelihood over a fixed hyperparameter grid."""
    best = (1.0, 1.0)
    best_lml = -np.inf
    for ls in _LENGTHSCALE_GRID:
        for sv in _SIGNAL_GRID:
            gp = _GP(float(ls), float(sv)).fit(X, y)
            lml = gp.log_marginal_likelihood(y)
            if lml > best_lml:
                best_lml = lml
                best = (float(ls), float(sv))
    return best


def expected_improvement(mean, std, best):
    improve = mean - best
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, improve / np.where(std > 0, std, 1.0), 0.0)
    ei = improve * ndtr(z) + std * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return np.where(std > 1e-12, np.maximum(ei, 0.0), 0.0)


# ---------------------------------------------------------------------------
# optimizer state


@dataclass
class SurrogateState:
    key: tuple[int, str]
    evaluations: list[tuple[Setting, float]] = field(default_factory=list)
    lengthscale: Optional[float] = None
    signal_var: Optional[float] = None
    fitted_at: int = -1

    def best_evaluation(self):
        return max(self.evaluations, key=lambda ev: ev[1])

    def to_mapping(self):
        return {
            "situation": self.key[0],
            "strategy": self.key[1],
            "evaluations": [{"setting": s, "score": y} for s, y in self.evaluations],
            "lengthscale": self.lengthscale,
            "signal_var": self.signal_var,
            "fitted_at": self.fitted_at,
        }

    @classmethod
    def from_mapping(cls, data):
        state = cls((int(data["situation"]), data["strategy"]))
        state.evaluations = [(dict(e["setting"]), float(e["score"])) for e in data["evaluations"]]
        state.lengthscale = data.get("lengthscale")
        state.signal_var = data.get("signal_var")
        state.fitted_at = data.get("fitted_at", -1)
        return state


class ParameterOptimizer:
    """Keeps one surrogate per (situation, strategy) key."""

    def __init__(self, seed: int = 0):
        self._seed = int(seed)
        self._states: dict[tuple[int, str], SurrogateState] = {}

    def has_state(self, key) -> bool:
        return (int(key[0]), key[1]) in self._states

    def activate(self, key, history: Optional[Sequence[tuple[Setting, float]]] = None) -> SurrogateState:
        """Return the state for ``key``; rebuild it from ``history`` (e.g.
        observations gathered while fallback rules ran this strategy) when
        the key was never seen."""
        key = (int(key[0]), key[1])
        state = self._states.get(key)
        if state is None:
            state = SurrogateState(key)
            if history:
                state.evaluations = [(dict(s), float(y)) for s, y in history]
            self._states[key] = state
        return state

    def observe(self, key, setting: Setting, score: float) -> SurrogateState:
        state = self.activate(key)
        state.evaluations.append((dict(setting), float(score)))
        return state

    def propose(
        self,
        key,
        specs: Sequence[ParameterOptionSpec],
        current: Setting,
    ) -> Setting:
        """Next parameter setting to try for ``key``.

        No evaluations yet: return ``current`` so the active configuration
        becomes the first evaluated point. Fewer than ``N_INIT``: a
        space-filling Sobol point. Otherwise the expected-improvement
        maximizer of the surrogate.
        """
        if not specs:
            return {}
        state = self.activate(key)
        n_evals = len(state.evaluations)
        if n_evals == 0:
            return dict(current)
        rng_seed = self._derive_seed(state.key, n_evals)
        if n_evals < N_INIT:
            sampler = qmc.Sobol(d=len(specs), scramble=True, seed=rng_seed)
            return decode_point(sampler.random_base2(0)[0], specs)
        return self._propose_by_ei(state, specs, rng_seed)

    def _derive_seed(self, key, n_evals):
        seq = np.random.SeedSequence(
            [self._seed, key[0] + 2, zlib.crc32(key[1].encode()), n_evals]
        )
        return np.random.default_rng(seq)

    def _propose_by_ei(self, state, specs, rng_seed):
        train = state.evaluations[-MAX_TRAIN:]
        X = np.array([encode_setting(s, specs) for s, _ in train])
        y_raw = np.array([y for _, y in train])
        y_mean = y_raw.mean()
        y_std = y_raw.std()
        if y_std <= 0:
            y_std = 1.0
        y = (y_raw - y_mean) / y_std

        if state.lengthscale is None or len(state.evaluations) - state.fitted_at >= REFIT_EVERY:
            state.lengthscale, state.signal_var = _fit_hyperparams(X, y)
            state.fitted_at = len(state.evaluations)
        gp = _GP(state.lengthscale, state.signal_var).fit(X, y)

        sampler = qmc.Sobol(d=len(specs), scramble=True, seed=rng_seed)
        candidates = sampler.random_base2(int(math.log2(N_CANDIDATES)))
        incumbent = X[int(np.argmax(y))]
        deltas = (0.05, -0.05, 0.15, -0.15)
        perturbed = []
        for j in range(N_PERTURBATIONS):
            dim = j % len(specs)
            delta = deltas[(j // len(specs)) % len(deltas)]
            point = incumbent.copy()
            point[dim] = np.clip(point[dim] + delta, 0.0, 1.0)
            perturbed.append(point)
        candidates = np.vstack([candidates, perturbed])

        mean, std = gp.predict(candidates)
        ei = expected_improvement(mean, std, y.max())
        ranked = np.argsort(-ei)
        seen = [dict(s) for s, _ in state.evaluations]
        for idx in ranked:
            setting = decode_point(candidates[idx], specs)
            if setting not in seen:
                return setting
        return decode_point(candidates[ranked[0]], specs)

    # -- persistence ---------------------------------------------------------

    def save_snapshots(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for (situation, strategy), state in sorted(self._states.items()):
            path = directory / f"surrogate_s{situation}_{strategy}.json"
            path.write_text(json.dumps(state.to_mapping(), indent=1))
            written.append(path)
        return written

    def load_snapshots(self, directory) -> int:
        directory = Path(directory)
        count = 0
        for path in sorted(directory.glob("surrogate_s*.json")):
            state = SurrogateState.from_mapping(json.loads(path.read_text()))
            self._states[state.key] = state
            count += 1
        return count
