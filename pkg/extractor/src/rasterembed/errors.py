"""Exception hierarchy. The CLI maps ConfigError and EncoderLoadError to
exit code 2 and DataError to exit code 3, matching the pipeline tools."""


class ExtractorError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ExtractorError):
    """Invalid or inconsistent configuration."""


class EncoderLoadError(ConfigError):
    """The requested encoder identifier cannot be resolved or constructed.

    Always fatal: a missing encoder is a setup problem, not a data problem.
    """


class DataError(ExtractorError):
    """Malformed or contract-violating input data."""


class ParseError(DataError):
    """A text file could not be parsed; the message names the offending line."""
