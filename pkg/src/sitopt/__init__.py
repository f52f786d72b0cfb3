"""Situation-aware optimization of adaptation planning strategies.

The framework watches a managed system through a stream of observations,
detects the operating situation, selects the most promising adaptation
planning strategy for it and tunes that strategy's parameters with Bayesian
optimization. A desk-scale platooning coordination simulator serves as the
reference managed system.
"""

from ._kernels import BACKEND
from .coordination import AdaptationDecision, Framework, load_framework
from .domain import DomainModel, load_domain_model, parse_domain_model
from .store import Observation, ObservationStore, compute_hypervolume

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AdaptationDecision",
    "Framework",
    "load_framework",
    "DomainModel",
    "load_domain_model",
    "parse_domain_model",
    "Observation",
    "ObservationStore",
    "compute_hypervolume",
    "__version__",
]
