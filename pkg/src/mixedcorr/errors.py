"""Exception hierarchy.

The CLI maps these onto exit codes: usage problems exit 2 (argparse),
:class:`DataError` exits 3, :class:`NumericError` exits 4.
"""


class MixedCorrError(Exception):
    """Base class for all package errors."""


class DataError(MixedCorrError):
    """Input data violates a precondition (degenerate column, bad CSV, ...)."""


class NumericError(MixedCorrError):
    """A numeric procedure could not meet its contract."""


class DomainError(NumericError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class GridError(NumericError):
    """Grid construction, serialization, or verification failure."""
