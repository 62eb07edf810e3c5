"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2, DataError and
its subclasses -> 3, InfeasibleBudgetError -> 4.
"""


class PruneforgeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PruneforgeError):
    """Invalid or inconsistent configuration."""


class DataError(PruneforgeError):
    """Malformed, corrupt, or contract-violating data."""


class ParseError(DataError):
    """A text file could not be parsed; the message names the offending line."""


class ValidationError(DataError):
    """Well-formed input that violates a documented invariant."""


class FormatError(DataError):
    """Binary container mismatch: bad magic, version, or payload size."""


class DegenerateInputError(DataError):
    """Structurally valid input that is numerically unusable.

    Examples: a zero-pixel image, a zero-norm embedding row, fewer distinct
    rows than requested cluster seeds.
    """


class InfeasibleBudgetError(PruneforgeError):
    """The requested subset size cannot be met by the available candidates."""
