"""Exception hierarchy.

Every error raised on bad input derives from :class:`EvaluationError`; the CLI
maps those to exit code 1. :class:`InvariantViolation` signals an internal bug
and maps to exit code 2.
"""

from __future__ import annotations


class EvaluationError(ValueError):
    """Base class for all input-driven failures."""


class InvariantViolation(RuntimeError):
    """An internal consistency check failed."""


# -- stream ingestion -------------------------------------------------------


class EmptyStream(EvaluationError):
    pass


class MalformedRecord(EvaluationError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateSampleId(MalformedRecord):
    pass


class NonMonotoneMonths(MalformedRecord):
    pass


class DimensionMismatch(EvaluationError):
    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class NonFiniteValue(EvaluationError):
    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


# -- scorers ----------------------------------------------------------------


class OutOfRange(EvaluationError):
    pass


class ClassTooSmall(EvaluationError):
    pass


class DegenerateMad(EvaluationError):
    pass


class UnknownScoreName(EvaluationError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


# -- metrics ----------------------------------------------------------------


class EmptyInput(EvaluationError):
    pass


class SingleClassInput(EvaluationError):
    pass


class AllUndefined(EvaluationError):
    pass


class TooFewPoints(EvaluationError):
    pass


class UndefinedPillar(EvaluationError):
    pass


# -- selective-classification simulation -------------------------------------


class QuotaExceedsPool(EvaluationError):
    pass


class MissingScore(EvaluationError):
    pass


class TooFewMonths(EvaluationError):
    pass


class UnknownRejectedId(EvaluationError):
    pass


class NoDefinedMonths(EvaluationError):
    pass


# -- budget selection -------------------------------------------------------


class BudgetExceedsPool(EvaluationError):
    pass


class FoldTooSmall(EvaluationError):
    pass


class BadFoldAssignment(EvaluationError):
    pass


# -- configuration ----------------------------------------------------------


class ConfigError(EvaluationError):
    pass
