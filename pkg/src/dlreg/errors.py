"""Exception types shared across the library.

The CLI maps these onto exit codes: configuration problems exit 1,
numerical/runtime failures exit 2, and anything wrong with input files
(missing, truncated, malformed) exits 3.
"""


class DlregError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(DlregError, ValueError):
    """An array has the wrong dimensionality, shape, or domain."""


class TargetError(DlregError, ValueError):
    """A target row is not one-hot."""


class StateError(DlregError, RuntimeError):
    """An operation was called on an object in the wrong lifecycle state."""


class SingularSystemError(DlregError, ArithmeticError):
    """A linear system stayed unfactorizable after jitter escalation."""


class ConfigError(DlregError, ValueError):
    """A configuration key, value, or combination is invalid."""


class IdxFormatError(DlregError, ValueError):
    """An IDX file has a bad magic number, inconsistent counts, or is truncated."""


class InsufficientDataError(DlregError, ValueError):
    """A dataset is too small for the requested operation."""
