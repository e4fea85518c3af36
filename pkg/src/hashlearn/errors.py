"""Exception hierarchy shared across the package."""


class HashLearnError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(HashLearnError):
    """Operands have incompatible shapes (code lengths, feature dims, ...)."""


class ConfigurationError(HashLearnError):
    """Invalid configuration value or inconsistent run setup."""


class ParseError(HashLearnError):
    """Malformed input file; message names the offending line."""


class DegenerateProblemError(HashLearnError):
    """An optimization problem has no active samples to work with."""


class NumericalError(HashLearnError):
    """Numerical breakdown (non-PSD kernel beyond repair, NaNs, ...)."""
