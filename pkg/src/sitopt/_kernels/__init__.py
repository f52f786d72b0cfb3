"""Numeric kernel backend selection.

The hot inner loops (clustering over the growing observation history and the
per-step vehicle advance) exist twice: a numba-compiled version and a pure
numpy version with identical semantics. The numba backend is used when
available; set ``SITOPT_DISABLE_NUMBA=1`` to force the numpy path.
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _numpy as numpy_backend

_flag = os.environ.get("SITOPT_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag in ("1", "true", "yes", "on")

if not _disabled:
    try:
        from . import _numba as _active

        BACKEND = "numba"
    except ImportError:
        _active = numpy_backend
        BACKEND = "numpy"
else:
    _active = numpy_backend
    BACKEND = "numpy"

kmeans_lloyd = _active.kmeans_lloyd
dbscan_labels = _active.dbscan_labels
optics_graph = _active.optics_graph
advance_vehicles = _active.advance_vehicles

__all__ = [
    "BACKEND",
    "numpy_backend",
    "kmeans_lloyd",
    "dbscan_labels",
    "optics_graph",
    "advance_vehicles",
]
