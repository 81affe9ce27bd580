"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class LingamkitError(Exception):
    """Base class for all errors raised by lingamkit."""


class DataValidationError(LingamkitError, ValueError):
    """Input data violates a schema, range, or shape requirement."""


class ConfigError(LingamkitError, ValueError):
    """Pipeline configuration is invalid or inconsistent."""


class NumericError(LingamkitError, ArithmeticError):
    """A computation is undefined for the given data (singular, degenerate)."""


class ConstraintError(NumericError):
    """Prior-knowledge constraints cannot be satisfied."""
