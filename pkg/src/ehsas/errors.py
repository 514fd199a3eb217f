"""Exception hierarchy shared across the package.

Errors split into two families so the CLI and service can map them to
exit codes / HTTP statuses: ConfigError for invalid parameters or
configuration, DataError for problems with input files and datasets.
"""


class EhsasError(Exception):
    """Base class for all package errors."""


class ConfigError(EhsasError):
    """Invalid configuration, parameters, or step ordering."""


class DataError(EhsasError):
    """Invalid or inconsistent input data (files, rows, labels, shapes)."""


class NumericError(EhsasError):
    """Numeric breakdown during training (non-finite loss or weights)."""
