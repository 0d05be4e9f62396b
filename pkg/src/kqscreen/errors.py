"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4, VerificationError -> 5.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PipelineError):
    """Invalid or inconsistent configuration."""


class SizingError(ConfigError):
    """Shape or parameter-count mismatch (infeasible embedding, wrong theta length, ...)."""


class DataError(PipelineError):
    """Malformed or unusable input data."""


class ParseError(DataError):
    """Input file does not match its schema; message names the offending field."""


class ValidationError(DataError):
    """Data violates a documented precondition."""


class NumericalError(PipelineError):
    """Numerical failure: degenerate input, non-convergence, overflow."""


class CapacityError(ConfigError):
    """Requested register size exceeds what the dense simulator supports."""


class VerificationError(PipelineError):
    """One or more structural verification checks failed."""
