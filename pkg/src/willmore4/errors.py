"""Exception hierarchy shared by all analysis modules.

The CLI maps these onto process exit codes: configuration problems exit
with 2, violated preconditions with 3, and numerical breakdowns with 4.
"""


class WillmoreError(Exception):
    """Base class for all package errors."""


class ConfigError(WillmoreError):
    """Malformed configuration, unknown keys, or unparsable expressions."""

    exit_code = 2


class PreconditionError(WillmoreError):
    """An operation was called on input that violates its contract."""

    exit_code = 3


class GeometryError(PreconditionError):
    """Degenerate geometry: rank-deficient immersion, bad normal bundle."""


class DegeneracyError(PreconditionError):
    """A field that must be nonvanishing has a zero on the grid."""


class ResolutionError(PreconditionError):
    """The grid is too coarse to resolve isolated zeros or loops."""


class NumericError(WillmoreError):
    """Non-finite values or solver failure during evaluation."""

    exit_code = 4
