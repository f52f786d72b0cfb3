from pathlib import Path

import pytest

from sitopt.domain import parse_domain_model

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# the documented example configuration: two generic strategies, DBSCAN
# situation detection, two tunable parameters, two performance measures
EXAMPLE_DOC = """\
use_case:
  name: platooning_coordination
  available_strategies: ["s_1", "s_2"]
  fallback_rules: "Path.To.Rules"
context:
  data:
    # any number of context parameters
    # with unique names
    context1:
      data_type: int
    context2:
      data_type: double
  situation_detection_settings:
    # available algorithms: RuleBased,
    # kMeans, DBSCAN, OPTICS
    algorithm: "DBSCAN"
    settings:
      min_samples: 120
      eps: 34
parameter_options:
  options:
    # any number of parameter options
    # with unique names
    param1:
      data_type: int
      min: 0
      max: 100
    param2:
      data_type: double
      min: 0.0
      max: 2.0
      # optional definition of
      # relevant strategies
      strategies: ["s_1"]
  strategy_selection_settings:
    observations_between_adaptations: 1
    min_optimization_attempts: 5
    window_size: 5
    threshold_exceeds: 3
    # available methods:
    # hypervolume, threshold
    method: "hypervolume"
    hypervolume_threshold: 3.4
performance_measures:
  pm1:
    data_type: int
    higher_is_better: True
    reference_value: -1
  pm2:
    data_type: double
    higher_is_better: False
    reference_value: 100.0
"""


@pytest.fixture(scope="session")
def example_model():
    return parse_domain_model(EXAMPLE_DOC)


@pytest.fixture(scope="session")
def desk_model():
    from sitopt.domain import load_domain_model

    return load_domain_model(CONFIG_DIR / "platooning.yaml")


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR
