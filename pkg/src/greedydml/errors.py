"""Exception hierarchy.

Every error raised by the package derives from :class:`GreedyDMLError`, which
itself subclasses :class:`ValueError` so callers that only expect bad-input
failures keep working.
"""

from __future__ import annotations


class GreedyDMLError(ValueError):
    """Base class for all package errors."""


# data validation
class LengthMismatch(GreedyDMLError):
    pass


class NonFiniteValue(GreedyDMLError):
    pass


class EmptyData(GreedyDMLError):
    pass


# selection
class DegenerateSize(GreedyDMLError):
    pass


class AllColumnsZero(GreedyDMLError):
    pass


class NumericalBreakdown(GreedyDMLError):
    pass


class SingularGram(GreedyDMLError):
    pass


# estimation
class TooFewObservations(GreedyDMLError):
    pass


class DegenerateTreatmentVariation(GreedyDMLError):
    """The treatment residuals carry no variation, so the score has no root."""


class WeakIdentification(GreedyDMLError):
    """Instrument residuals are (numerically) orthogonal to treatment residuals."""


class EmptyList(GreedyDMLError):
    pass


# basis
class DegreeTooLarge(GreedyDMLError):
    pass


# simulation
class ReplicationFailureRate(GreedyDMLError):
    pass


# cli / io
class UsageError(GreedyDMLError):
    pass


class UnknownFlag(UsageError):
    pass


class MissingBinding(UsageError):
    pass


class MissingColumn(GreedyDMLError):
    pass


class ParseError(GreedyDMLError):
    def __init__(self, row: int, column: str, value: str = "") -> None:
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"cannot parse {value!r} as a number at row {row}, column {column!r}")
