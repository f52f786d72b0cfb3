"""Exception types raised across the framework.

Configuration errors carry the offending key path so a rejected document
can be fixed without reading a stack trace.
"""


class SitoptError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SitoptError):
    """A configuration document failed validation.

    ``path`` is the dotted key path of the offending entry, e.g.
    ``parameter_options.options.param1.min``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MissingSectionError(ConfigError):
    pass


class MissingKeyError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    pass


class DuplicateKeyError(ConfigError):
    pass


class BadTypeError(ConfigError):
    pass


class BadRangeError(ConfigError):
    pass


class UnknownAlgorithmError(ConfigError):
    pass


class MissingAlgorithmSettingError(ConfigError):
    pass


class UnknownStrategyReferenceError(ConfigError):
    pass


class MissingThresholdValueError(ConfigError):
    pass


class RuleFileError(ConfigError):
    """A declarative rule file is malformed."""


class UnknownStrategyError(SitoptError):
    pass


class UnknownFieldError(SitoptError):
    """A rule condition references a context field that does not exist."""


# -- observation store ------------------------------------------------------

class KeyMismatchError(SitoptError):
    pass


class NonFiniteValueError(SitoptError):
    pass


class SchemaViolationError(SitoptError):
    """An observation does not match the declared context/input/metric schema."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NonMonotonicTimestampError(SitoptError):
    pass


# -- situation detection ----------------------------------------------------

class ConfigMissingError(SitoptError):
    """A required algorithm setting is absent at detection time."""


class EmptyInputError(SitoptError):
    pass


class KExceedsPointsError(SitoptError):
    pass


class LengthMismatchError(SitoptError):
    pass


# -- strategy selection -----------------------------------------------------

class EmptyOrderError(SitoptError):
    pass


class MissingThresholdError(SitoptError):
    pass


class NoHistoryError(SitoptError):
    pass


# -- parameter optimization -------------------------------------------------

class NoParametersError(SitoptError):
    """The strategy has zero tunable parameters."""


# -- adapter / use case -----------------------------------------------------

class MalformedBodyError(SitoptError):
    pass


class EmptyWindowError(SitoptError):
    pass


# -- experiments ------------------------------------------------------------

class ConfigNotFoundError(SitoptError):
    pass


class SimulationDivergedError(SitoptError):
    pass


class IncompatibleRunsError(SitoptError):
    pass
