"""Exception types shared across the package.

Invalid arguments raise plain ``ValueError``; the classes below cover the
failure modes the CLI maps to distinct exit codes.
"""


class ConfigError(ValueError):
    """A configuration file or value violates its contract."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (blow-up, singular system, bad residual)."""


class StorageError(OSError):
    """A tensor or model file is malformed, truncated, or too large."""
