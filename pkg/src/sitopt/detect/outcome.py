from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


@dataclass
class ClusteringOutcome:
    """Labels aligned with the clustered point sequence.

    ``id_mapping`` records how raw cluster ids were renamed (empty when no
    renaming happened); -1 is noise and is never remapped.
    """

    labels: np.ndarray
    id_mapping: Mapping[int, int] = field(default_factory=dict)
