from __future__ import annotations

from typing import Any

__all__ = (
    "ProjGPError",
    "UsageError",
    "NumericalError",
    "DimensionMismatch",
    "NonFiniteInput",
    "NonFiniteValue",
    "ParseError",
    "MissingTarget",
    "TooFewPoints",
    "InvalidDegrees",
    "EmptyProjectionSet",
    "UnsupportedDegree",
    "UnsupportedFamily",
    "InvalidDelta",
    "DegenerateDirection",
    "OutOfBounds",
    "NotPositiveDefinite",
    "NumericalBreakdown",
    "OptimizerDiverged",
    "NonFiniteGradient",
)


class ProjGPError(Exception):
    """Base class for every error raised by projgp."""

    exit_code: int = 1

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.context: dict[str, Any] = context

    def to_record(self) -> dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self), **self.context}


class UsageError(ProjGPError):
    """Bad configuration or input data."""

    exit_code = 2


class NumericalError(ProjGPError):
    """A numerical routine failed on otherwise valid input."""

    exit_code = 1
    # set by the optimiser to the TrainTrace up to the failing iteration
    trace: Any = None


class DimensionMismatch(UsageError):
    def __init__(self, what: str, expected: Any, got: Any) -> None:
        super().__init__(f"{what}: expected {expected}, got {got}.", expected=expected, got=got)


class NonFiniteInput(UsageError):
    ...


class NonFiniteValue(UsageError):
    def __init__(self, row: int, column: int) -> None:
        super().__init__(f"Non-finite value at row {row}, column {column}.", row=row, column=column)


class ParseError(UsageError):
    def __init__(self, row: int, column: int, value: str) -> None:
        super().__init__(f"Could not parse {value!r} at row {row}, column {column}.", row=row, column=column, value=value)
        self.row = row
        self.column = column


class MissingTarget(UsageError):
    def __init__(self, target: str | int) -> None:
        super().__init__(f"Target column {target!r} not found.", target=target)


class TooFewPoints(UsageError):
    def __init__(self, n: int, required: int) -> None:
        super().__init__(f"Need at least {required} points, got {n}.", n=n, required=required)


class InvalidDegrees(UsageError):
    ...


class EmptyProjectionSet(UsageError):
    ...


class UnsupportedDegree(UsageError):
    ...


class UnsupportedFamily(UsageError):
    ...


class InvalidDelta(UsageError):
    ...


class DegenerateDirection(UsageError):
    ...


class OutOfBounds(UsageError):
    def __init__(self, value: float, lower: float, upper: float) -> None:
        super().__init__(f"Point {value} outside grid [{lower}, {upper}].", value=value, lower=lower, upper=upper)


class NotPositiveDefinite(NumericalError):
    def __init__(self, pivot: int, jitter: float = 0.0, theta: list[float] | None = None) -> None:
        super().__init__(
            f"Matrix is not positive definite (pivot {pivot}, jitter {jitter:.3g}).",
            pivot=pivot,
            jitter=jitter,
            theta=theta,
        )
        self.pivot = pivot
        self.jitter = jitter


class NumericalBreakdown(NumericalError):
    ...


class OptimizerDiverged(NumericalError):
    ...


class NonFiniteGradient(NumericalError):
    ...
