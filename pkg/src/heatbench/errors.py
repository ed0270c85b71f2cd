"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, OracleError -> 2,
and a run that lost some (but not all) methods -> 3.
"""


class HeatbenchError(Exception):
    """Base class for package-specific errors."""


class ConfigError(HeatbenchError):
    """Invalid run configuration, manifest, or container data."""


class OracleError(HeatbenchError):
    """Failure while talking to or validating a model endpoint."""


class ProtocolError(OracleError):
    """Malformed traffic on the oracle wire protocol."""


class UndefinedStatisticError(HeatbenchError):
    """A statistic is undefined for the given input (e.g. constant vector)."""
