"""Exception types. Each maps to a CLI exit code."""


class AmlGraphError(Exception):
    exit_code = 1


class ConfigError(AmlGraphError):
    """Bad parameters or configuration (exit code 2)."""

    exit_code = 2


class DataError(AmlGraphError):
    """Input data fails an integrity check (exit code 3)."""

    exit_code = 3


class ContractError(DataError):
    """An operation was called outside its contract."""


class NumericError(AmlGraphError):
    """Numerical failure during training or evaluation (exit code 4)."""

    exit_code = 4


class UndefinedMetricError(NumericError):
    """The requested metric is undefined for the given inputs."""
