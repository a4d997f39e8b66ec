"""Exception hierarchy; the CLI maps these onto distinct exit codes."""


class RcseqError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(RcseqError):
    """Invalid configuration or an unusable parameter combination."""


class DataError(RcseqError):
    """Malformed, inconsistent, or insufficient input data."""


class AnalysisError(RcseqError):
    """An analysis stage could not produce a valid result."""
