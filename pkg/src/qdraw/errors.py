"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class ConfigError(Exception):
    """Raised when a run configuration file is malformed or inconsistent."""
