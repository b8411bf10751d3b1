"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class TrajcritError(Exception):
    """Base class for all errors raised by this package."""


class DataError(TrajcritError):
    """Input data is malformed or inconsistent (CLI exit code 1)."""


class ConfigError(TrajcritError):
    """Run configuration is invalid (CLI exit code 2)."""


class SchemaError(DataError):
    """A CSV file does not match the expected column layout."""


class LayoutError(DataError):
    """Lane IDs or location do not match any known lane layout."""


class SynchronizationError(DataError):
    """Two frame states passed together do not share a frame index."""


class EmptySliceError(DataError):
    """An aggregation window contains no frames of the recording."""


class SpecError(ConfigError):
    """A histogram or smoothing spec is malformed."""


class UndefinedCorrelationError(DataError):
    """Correlation requested on data with zero variance."""


class DegenerateDataError(DataError):
    """Sample is degenerate for the requested fit (e.g. constant data)."""


class GenerationError(ConfigError):
    """A synthetic scenario script is infeasible."""
