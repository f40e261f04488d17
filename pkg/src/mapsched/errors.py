"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: ConfigError (and subclasses) -> 1,
NumericalError -> 2, CertificationError -> 3.
"""


class MapschedError(Exception):
    """Base class for all package errors."""


class ConfigError(MapschedError):
    """Invalid configuration file, scenario, or argument."""


class ParameterError(ConfigError):
    """Physical parameter or precondition violation."""


class NumericalError(MapschedError):
    """A solver or filter failed numerically (singular/indefinite/underflow)."""


class CertificationError(MapschedError):
    """Stability certification did not succeed."""
