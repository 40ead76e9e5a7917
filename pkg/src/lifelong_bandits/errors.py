"""Exception types shared across the package."""


class DomainError(ValueError):
    """A query point lies outside the feature atlas domain."""


class EmptyKernelError(ValueError):
    """A kernel estimate with no selected groups was used where a kernel value
    is required."""


class DataError(ValueError):
    """A data file (lookup table, trace) is malformed or inconsistent."""


class ConfigError(ValueError):
    """An experiment configuration is missing, malformed, or inconsistent."""
