"""Domain model: the single use-case-specific configuration document.

The framework itself is use-case agnostic; everything it needs to know about
the managed system comes from one YAML document with four sections:

* ``use_case`` -- name, the orderered list of adaptation planning strategies,
  and the path to the fallback rule file;
* ``context`` -- which context fields arrive with every observation, plus the
  situation-detection algorithm and its settings;
* ``parameter_options`` -- the tunable strategy parameters (name, type,
  bounds, optional strategy restriction) and the strategy-selection settings;
* ``performance_measures`` -- the metrics reported by the use case, each with
  orientation and a reference value for hypervolume scoring.

Parsing is strict: unknown keys, duplicate keys, type mismatches and
inconsistent settings are rejected with the offending key path. A document
either parses completely or not at all.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Mapping, Optional

import yaml

from .errors import (
    BadRangeError,
    BadTypeError,
    ConfigError,
    DuplicateKeyError,
    MissingAlgorithmSettingError,
    MissingKeyError,
    MissingSectionError,
    MissingThresholdValueError,
    UnknownAlgorithmError,
    UnknownKeyError,
    UnknownStrategyError,
    UnknownStrategyReferenceError,
)

DETECTION_ALGORITHMS = ("RuleBased", "kMeans", "DBSCAN", "OPTICS")
SELECTION_METHODS = ("hypervolume", "threshold")


@dataclass(frozen=True)
class UseCaseSection:
    name: str
    available_strategies: tuple[str, ...]
    fallback_rules: str


@dataclass(frozen=True)
class ContextFieldSpec:
    name: str
    data_type: str  # "int" | "double"


@dataclass(frozen=True)
class DetectionSettings:
    algorithm: str
    settings: Mapping[str, object]

    def require(self, key):
        """Fetch a setting that the configured algorithm needs at runtime."""
        from .errors import ConfigMissingError

        if key not in self.settings:
            raise ConfigMissingError(f"detection setting {key!r} is missing")
        return self.settings[key]


@dataclass(frozen=True)
class ContextSection:
    data: Mapping[str, ContextFieldSpec]
    situation_detection_settings: DetectionSettings


@dataclass(frozen=True)
class ParameterOptionSpec:
    name: str
    data_type: str  # "int" | "double"
    min: float
    max: float
    strategies: Optional[tuple[str, ...]] = None  # None = all strategies

    def applies_to(self, strategy: str) -> bool:
        return self.strategies is None or strategy in self.strategies


@dataclass(frozen=True)
class StrategySelectionSettings:
    observations_between_adaptations: int
    min_optimization_attempts: int
    window_size: int
    threshold_exceeds: int
    method: str  # "hypervolume" | "threshold"
    hypervolume_threshold: Optional[float] = None


@dataclass(frozen=True)
class ParameterSection:
    options: Mapping[str, ParameterOptionSpec]
    strategy_selection_settings: StrategySelectionSettings


@dataclass(frozen=True)
class PerformanceMeasureSpec:
    name: str
    data_type: str
    higher_is_better: bool
    reference_value: float
    threshold_value: Optional[float] = None


@dataclass(frozen=True)
class DomainModel:
    use_case: UseCaseSection
    context: ContextSection
    parameter_options: ParameterSection
    performance_measures: Mapping[str, PerformanceMeasureSpec]

    @property
    def strategies(self) -> tuple[str, ...]:
        return self.use_case.available_strategies

    @property
    def selection_settings(self) -> StrategySelectionSettings:
        return self.parameter_options.strategy_selection_settings

    def parameters_for_strategy(self, strategy: str) -> list[ParameterOptionSpec]:
        """Options applying to ``strategy``, in declaration order.

        An option with no ``strategies`` restriction applies to every
        strategy.
        """
        if strategy not in self.use_case.available_strategies:
            raise UnknownStrategyError(f"unknown strategy {strategy!r}")
        return [o for o in self.parameter_options.options.values() if o.applies_to(strategy)]

    def to_mapping(self) -> dict:
        """Plain mapping with the exact document key names (round-trips)."""
        options = {}
        for opt in self.parameter_options.options.values():
            entry = {"data_type": opt.data_type, "min": opt.min, "max": opt.max}
            if opt.strategies is not None:
                entry["strategies"] = list(opt.strategies)
            options[opt.name] = entry
        sss = self.parameter_options.strategy_selection_settings
        sss_map = {
            "observations_between_adaptations": sss.observations_between_adaptations,
            "min_optimization_attempts": sss.min_optimization_attempts,
            "window_size": sss.window_size,
            "threshold_exceeds": sss.threshold_exceeds,
            "method": sss.method,
        }
        if sss.hypervolume_threshold is not None:
            sss_map["hypervolume_threshold"] = sss.hypervolume_threshold
        measures = {}
        for pm in self.performance_measures.values():
            entry = {
                "data_type": pm.data_type,
                "higher_is_better": pm.higher_is_better,
                "reference_value": pm.reference_value,
            }
            if pm.threshold_value is not None:
                entry["threshold_value"] = pm.threshold_value
            measures[pm.name] = entry
        return {
            "use_case": {
                "name": self.use_case.name,
                "available_strategies": list(self.use_case.available_strategies),
                "fallback_rules": self.use_case.fallback_rules,
            },
            "context": {
                "data": {
                    f.name: {"data_type": f.data_type} for f in self.context.data.values()
                },
                "situation_detection_settings": {
                    "algorithm": self.context.situation_detection_settings.algorithm,
                    "settings": dict(self.context.situation_detection_settings.settings),
                },
            },
            "parameter_options": {
                "options": options,
                "strategy_selection_settings": sss_map,
            },
            "performance_measures": measures,
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_mapping(), sort_keys=False)


# ---------------------------------------------------------------------------
# parsing


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that rejects duplicate mapping keys instead of overriding."""


def _construct_mapping_no_duplicates(loader, node, deep=False):
    mapping = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in mapping:
            raise DuplicateKeyError(str(key), "duplicate mapping key")
        mapping[key] = loader.construct_object(value_node, deep=deep)
    return mapping


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping_no_duplicates
)


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _require_mapping(value, path):
    if not isinstance(value, dict):
        raise BadTypeError(path, "expected a mapping")
    return value


def _reject_unknown(mapping, allowed, path):
    for key in mapping:
        if key not in allowed:
            raise UnknownKeyError(_join(path, key), "unknown key")


def _get(mapping, key, path, error=MissingKeyError):
    if key not in mapping:
        raise error(_join(path, key), "required key is missing")
    return mapping[key]


def _check_str(value, path):
    if not isinstance(value, str) or not value:
        raise BadTypeError(path, "expected a non-empty string")
    return value


def _check_bool(value, path):
    if not isinstance(value, bool):
        raise BadTypeError(path, "expected a boolean")
    return value


def _check_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadTypeError(path, "expected an integer")
    if minimum is not None and value < minimum:
        raise BadRangeError(path, f"must be >= {minimum}")
    return value


def _check_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadTypeError(path, "expected a number")
    return value


def _check_scalar(value, data_type, path):
    """int fields take integral literals only; double also accepts them."""
    if data_type == "int":
        return _check_int(value, path)
    return float(_check_number(value, path))


def _check_data_type(value, path):
    if value not in ("int", "double"):
        raise BadTypeError(path, "data_type must be 'int' or 'double'")
    return value


_DETECTION_SETTING_SCHEMAS = {
    "RuleBased": {"required": ("rules",), "optional": ()},
    "kMeans": {"required": (), "optional": ("k", "k_min", "k_max", "seed")},
    "DBSCAN": {"required": ("min_samples", "eps"), "optional": ()},
    "OPTICS": {"required": ("min_samples", "min_cluster_size"), "optional": ("xi",)},
}


def _parse_detection(mapping, path):
    mapping = _require_mapping(mapping, path)
    _reject_unknown(mapping, ("algorithm", "settings"), path)
    algorithm = _check_str(_get(mapping, "algorithm", path), _join(path, "algorithm"))
    if algorithm not in DETECTION_ALGORITHMS:
        raise UnknownAlgorithmError(
            _join(path, "algorithm"),
            f"unknown algorithm {algorithm!r}; available: {', '.join(DETECTION_ALGORITHMS)}",
        )
    settings_path = _join(path, "settings")
    settings = _require_mapping(_get(mapping, "settings", path), settings_path)
    schema = _DETECTION_SETTING_SCHEMAS[algorithm]
    allowed = set(schema["required"]) | set(schema["optional"])
    _reject_unknown(settings, allowed, settings_path)
    for key in schema["required"]:
        if key not in settings:
            raise MissingAlgorithmSettingError(
                _join(settings_path, key), f"required by {algorithm}"
            )

    if algorithm == "RuleBased":
        _check_str(settings["rules"], _join(settings_path, "rules"))
    elif algorithm == "kMeans":
        if "k" in settings:
            if "k_min" in settings or "k_max" in settings:
                raise UnknownKeyError(
                    _join(settings_path, "k_min" if "k_min" in settings else "k_max"),
                    "fixed k and a k range are mutually exclusive",
                )
            _check_int(settings["k"], _join(settings_path, "k"), minimum=1)
        else:
            for key in ("k_min", "k_max"):
                if key not in settings:
                    raise MissingAlgorithmSettingError(
                        _join(settings_path, key), "kMeans needs k or k_min/k_max"
                    )
                _check_int(settings[key], _join(settings_path, key), minimum=1)
            if settings["k_min"] > settings["k_max"]:
                raise BadRangeError(_join(settings_path, "k_min"), "k_min must be <= k_max")
        if "seed" in settings:
            _check_int(settings["seed"], _join(settings_path, "seed"))
    elif algorithm == "DBSCAN":
        _check_int(settings["min_samples"], _join(settings_path, "min_samples"), minimum=1)
        eps = _check_number(settings["eps"], _join(settings_path, "eps"))
        if eps <= 0:
            raise BadRangeError(_join(settings_path, "eps"), "eps must be > 0")
    elif algorithm == "OPTICS":
        _check_int(settings["min_samples"], _join(settings_path, "min_samples"), minimum=1)
        _check_int(
            settings["min_cluster_size"], _join(settings_path, "min_cluster_size"), minimum=1
        )
        if "xi" in settings:
            xi = _check_number(settings["xi"], _join(settings_path, "xi"))
            if not 0 < xi < 1:
                raise BadRangeError(_join(settings_path, "xi"), "xi must be in (0, 1)")

    return DetectionSettings(algorithm=algorithm, settings=dict(settings))


def domain_model_from_mapping(document: Mapping) -> DomainModel:
    document = _require_mapping(document, "")
    for section in ("use_case", "context", "parameter_options", "performance_measures"):
        if section not in document:
            raise MissingSectionError(section, "required section is missing")
    _reject_unknown(
        document,
        ("use_case", "context", "parameter_options", "performance_measures"),
        "",
    )

    # -- use_case
    uc_path = "use_case"
    uc = _require_mapping(document["use_case"], uc_path)
    _reject_unknown(uc, ("name", "available_strategies", "fallback_rules"), uc_path)
    name = _check_str(_get(uc, "name", uc_path), _join(uc_path, "name"))
    strategies_raw = _get(uc, "available_strategies", uc_path)
    strat_path = _join(uc_path, "available_strategies")
    if not isinstance(strategies_raw, list) or not strategies_raw:
        raise BadTypeError(strat_path, "expected a non-empty list of strategy names")
    strategies = []
    for i, entry in enumerate(strategies_raw):
        entry = _check_str(entry, f"{strat_path}[{i}]")
        if entry in strategies:
            raise DuplicateKeyError(f"{strat_path}[{i}]", f"duplicate strategy {entry!r}")
        strategies.append(entry)
    fallback = _check_str(_get(uc, "fallback_rules", uc_path), _join(uc_path, "fallback_rules"))
    use_case = UseCaseSection(name, tuple(strategies), fallback)

    # -- context
    ctx_path = "context"
    ctx = _require_mapping(document["context"], ctx_path)
    _reject_unknown(ctx, ("data", "situation_detection_settings"), ctx_path)
    data_path = _join(ctx_path, "data")
    data_raw = _require_mapping(_get(ctx, "data", ctx_path), data_path)
    if not data_raw:
        raise BadTypeError(data_path, "at least one context field is required")
    fields = {}
    for fname, fspec in data_raw.items():
        fpath = _join(data_path, fname)
        fspec = _require_mapping(fspec, fpath)
        _reject_unknown(fspec, ("data_type",), fpath)
        dtype = _check_data_type(_get(fspec, "data_type", fpath), _join(fpath, "data_type"))
        fields[fname] = ContextFieldSpec(fname, dtype)
    detection = _parse_detection(
        _get(ctx, "situation_detection_settings", ctx_path),
        _join(ctx_path, "situation_detection_settings"),
    )
    context = ContextSection(fields, detection)

    # -- parameter_options
    po_path = "parameter_options"
    po = _require_mapping(document["parameter_options"], po_path)
    _reject_unknown(po, ("options", "strategy_selection_settings"), po_path)
    options_path = _join(po_path, "options")
    options_raw = _require_mapping(_get(po, "options", po_path), options_path)
    options = {}
    for oname, ospec in options_raw.items():
        opath = _join(options_path, oname)
        ospec = _require_mapping(ospec, opath)
        _reject_unknown(ospec, ("data_type", "min", "max", "strategies"), opath)
        dtype = _check_data_type(_get(ospec, "data_type", opath), _join(opath, "data_type"))
        lo = _check_scalar(_get(ospec, "min", opath), dtype, _join(opath, "min"))
        hi = _check_scalar(_get(ospec, "max", opath), dtype, _join(opath, "max"))
        if not lo < hi:
            raise BadRangeError(_join(opath, "min"), f"min ({lo}) must be < max ({hi})")
        restricted = None
        if "strategies" in ospec:
            sl = ospec["strategies"]
            spath = _join(opath, "strategies")
            if not isinstance(sl, list) or not sl:
                raise BadTypeError(spath, "expected a non-empty list of strategy names")
            for i, entry in enumerate(sl):
                entry = _check_str(entry, f"{spath}[{i}]")
                if entry not in use_case.available_strategies:
                    raise UnknownStrategyReferenceError(
                        f"{spath}[{i}]", f"{entry!r} is not an available strategy"
                    )
            restricted = tuple(sl)
        options[oname] = ParameterOptionSpec(oname, dtype, lo, hi, restricted)

    sss_path = _join(po_path, "strategy_selection_settings")
    sss_raw = _require_mapping(_get(po, "strategy_selection_settings", po_path), sss_path)
    _reject_unknown(
        sss_raw,
        (
            "observations_between_adaptations",
            "min_optimization_attempts",
            "window_size",
            "threshold_exceeds",
            "method",
            "hypervolume_threshold",
        ),
        sss_path,
    )
    counts = {}
    for key, minimum in (
        ("observations_between_adaptations", 0),
        ("min_optimization_attempts", 0),
        ("window_size", 1),
        ("threshold_exceeds", 0),
    ):
        counts[key] = _check_int(_get(sss_raw, key, sss_path), _join(sss_path, key), minimum)
    if counts["threshold_exceeds"] > counts["window_size"]:
        raise BadRangeError(
            _join(sss_path, "threshold_exceeds"), "threshold_exceeds must be <= window_size"
        )
    method = _check_str(_get(sss_raw, "method", sss_path), _join(sss_path, "method"))
    if method not in SELECTION_METHODS:
        raise BadTypeError(
            _join(sss_path, "method"),
            f"method must be one of: {', '.join(SELECTION_METHODS)}",
        )
    hv_threshold = None
    if method == "hypervolume" and "hypervolume_threshold" not in sss_raw:
        raise MissingThresholdValueError(
            _join(sss_path, "hypervolume_threshold"),
            "required when method is 'hypervolume'",
        )
    if "hypervolume_threshold" in sss_raw:
        hv_threshold = float(
            _check_number(
                sss_raw["hypervolume_threshold"], _join(sss_path, "hypervolume_threshold")
            )
        )
    selection = StrategySelectionSettings(
        observations_between_adaptations=counts["observations_between_adaptations"],
        min_optimization_attempts=counts["min_optimization_attempts"],
        window_size=counts["window_size"],
        threshold_exceeds=counts["threshold_exceeds"],
        method=method,
        hypervolume_threshold=hv_threshold,
    )
    parameter_options = ParameterSection(options, selection)

    # -- performance_measures
    pm_path = "performance_measures"
    pm_raw = _require_mapping(document["performance_measures"], pm_path)
    if not pm_raw:
        raise BadTypeError(pm_path, "at least one performance measure is required")
    measures = {}
    for mname, mspec in pm_raw.items():
        mpath = _join(pm_path, mname)
        mspec = _require_mapping(mspec, mpath)
        _reject_unknown(
            mspec, ("data_type", "higher_is_better", "reference_value", "threshold_value"), mpath
        )
        dtype = _check_data_type(_get(mspec, "data_type", mpath), _join(mpath, "data_type"))
        higher = _check_bool(
            _get(mspec, "higher_is_better", mpath), _join(mpath, "higher_is_better")
        )
        reference = _check_scalar(
            _get(mspec, "reference_value", mpath), dtype, _join(mpath, "reference_value")
        )
        threshold = None
        if "threshold_value" in mspec:
            threshold = _check_scalar(
                mspec["threshold_value"], dtype, _join(mpath, "threshold_value")
            )
        elif method == "threshold":
            raise MissingThresholdValueError(
                _join(mpath, "threshold_value"), "required when method is 'threshold'"
            )
        measures[mname] = PerformanceMeasureSpec(mname, dtype, higher, reference, threshold)

    return DomainModel(use_case, context, parameter_options, measures)


def parse_domain_model(text: str) -> DomainModel:
    """Parse and fully validate a configuration document.

    Raises a :class:`~sitopt.errors.ConfigError` subclass naming the
    offending key path; a document never parses partially.
    """
    try:
        document = yaml.load(io.StringIO(text), Loader=_StrictLoader)
    except DuplicateKeyError:
        raise
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not a well-formed YAML document: {exc}") from exc
    return domain_model_from_mapping(document)


def load_domain_model(path) -> DomainModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_domain_model(fh.read())
