"""Exception types shared across the package.

The CLI maps each category to a distinct exit code, so commands fail in a
machine-readable way.
"""


class SodesnError(Exception):
    """Base class for errors raised by this package."""

    category = "runtime"


class ConfigError(SodesnError):
    """Invalid or inconsistent configuration."""

    category = "config"


class DataError(SodesnError):
    """Malformed or missing input data."""

    category = "data"


class NumericError(SodesnError):
    """Numerical failure (singular systems, non-convergence, ...)."""

    category = "numeric"
