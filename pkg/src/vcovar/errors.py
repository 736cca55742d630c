"""Exception types shared across the package.

The CLI maps each class to a distinct exit code, so raising the right type
matters more than the message text.
"""


class VcovarError(Exception):
    """Base class for package errors."""


class ConfigError(VcovarError):
    """Bad run configuration: unknown keys, out-of-domain levels, missing files."""


class DataError(VcovarError):
    """Input data violates the schema: duplicate dates, non-positive prices, ..."""


class FitError(VcovarError):
    """An estimation routine failed to produce a usable optimum."""


class SolverError(VcovarError):
    """A root-finding problem has no bracket or did not converge."""
