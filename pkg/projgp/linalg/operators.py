from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..config import CONFIG
from ..errors import DimensionMismatch
from ..types import FloatArray

__all__ = (
    "SymmetricOperator",
    "DenseOperator",
    "MatvecOperator",
    "SumOperator",
    "CGConfig",
)


class SymmetricOperator(ABC):
    """A symmetric linear map on R^n known only through its action on vectors.

    ``apply`` accepts a vector of shape ``(n,)`` or a block of vectors ``(n, k)``.
    """

    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError("Operator dimension must be positive.")
        self.n = n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @abstractmethod
    def _apply(self, v: FloatArray) -> FloatArray:
        ...

    def apply(self, v: FloatArray) -> FloatArray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.n or v.ndim > 2:
            raise DimensionMismatch("operator input", (self.n,), v.shape)
        return self._apply(v)

    def __call__(self, v: FloatArray) -> FloatArray:
        return self.apply(v)

    def diagonal(self) -> FloatArray:
        """The operator's diagonal, by probing with unit vectors unless overridden."""
        return np.einsum("ii->i", self.to_dense()).copy()

    def to_dense(self) -> FloatArray:
        return self.apply(np.eye(self.n))


class DenseOperator(SymmetricOperator):
    def __init__(self, matrix: FloatArray) -> None:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch("dense operator", "square matrix", matrix.shape)
        super().__init__(matrix.shape[0])
        self.matrix = matrix

    def _apply(self, v: FloatArray) -> FloatArray:
        return self.matrix @ v

    def diagonal(self) -> FloatArray:
        return np.diag(self.matrix).copy()

    def to_dense(self) -> FloatArray:
        return self.matrix.copy()


class MatvecOperator(SymmetricOperator):
    def __init__(self, n: int, matvec: Callable[[FloatArray], FloatArray], diagonal: FloatArray | None = None) -> None:
        super().__init__(n)
        self._matvec = matvec
        self._diagonal = diagonal

    def _apply(self, v: FloatArray) -> FloatArray:
        return self._matvec(v)

    def diagonal(self) -> FloatArray:
        if self._diagonal is not None:
            return self._diagonal
        return super().diagonal()


class SumOperator(SymmetricOperator):
    """Weighted sum of operators plus a ridge, terms applied in a fixed order."""

    def __init__(self, terms: list[SymmetricOperator], weights: FloatArray, ridge: float = 0.0) -> None:
        if not terms:
            raise ValueError("SumOperator needs at least one term.")
        n = terms[0].n
        if any(term.n != n for term in terms):
            raise DimensionMismatch("operator terms", n, [term.n for term in terms])
        super().__init__(n)
        self.terms = terms
        self.weights = np.asarray(weights, dtype=np.float64)
        self.ridge = float(ridge)

    def _apply(self, v: FloatArray) -> FloatArray:
        result = self.ridge * v
        for weight, term in zip(self.weights, self.terms):
            result = result + weight * term.apply(v)
        return result

    def diagonal(self) -> FloatArray:
        result = np.full(self.n, self.ridge)
        for weight, term in zip(self.weights, self.terms):
            result += weight * term.diagonal()
        return result


@dataclass(frozen=True)
class CGConfig:
    tolerance: float = 1e-4
    max_iterations: int = 1000
    preconditioner: Literal["none", "diagonal"] = "none"

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValueError("CG tolerance must be positive.")
        if self.max_iterations < 1:
            raise ValueError("CG needs at least one iteration.")

    @classmethod
    def training(cls) -> CGConfig:
        return cls(CONFIG.LINALG.CG_TOLERANCE_TRAIN, CONFIG.LINALG.CG_MAX_ITERATIONS)

    @classmethod
    def prediction(cls) -> CGConfig:
        return cls(CONFIG.LINALG.CG_TOLERANCE_PREDICT, CONFIG.LINALG.CG_MAX_ITERATIONS)
