"""Exception hierarchy shared by the library and the command line tool.

The split mirrors how failures are reported to callers: configuration and
schema problems are user-fixable before any data is touched, data errors
mean the inputs violate the documented contracts, and numerical errors mean
an estimation step could not be completed (rank deficiency, degenerate
targets, exhausted resampling).
"""


class LongfuseError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(LongfuseError):
    """Invalid schema or configuration (bad roles, unknown columns, ...)."""


class DataError(LongfuseError):
    """Input data violates a contract (bad values, empty sources, ...)."""


class EstimationError(LongfuseError):
    """A numerical procedure failed (rank deficiency, degenerate fit, ...)."""
