from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from ..errors import DimensionMismatch
from ..types import FloatArray

__all__ = (
    "ToeplitzColumn",
    "toeplitz_matvec",
    "circulant_size",
)


def circulant_size(m: int) -> int:
    """Smallest power of two that can hold the circulant embedding of an m x m Toeplitz matrix."""
    size = 1
    while size < 2 * m - 1:
        size *= 2
    return size


@dataclass(frozen=True)
class ToeplitzColumn:
    """A symmetric Toeplitz matrix ``T[i, j] = column[|i - j|]``."""

    column: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        column = np.asarray(self.column, dtype=np.float64)
        if column.ndim != 1 or column.size == 0:
            raise DimensionMismatch("Toeplitz column", "non-empty vector", column.shape)
        object.__setattr__(self, "column", column)

    @property
    def m(self) -> int:
        return self.column.size

    @cached_property
    def spectrum(self) -> FloatArray:
        m = self.m
        size = circulant_size(m)
        circ = np.zeros(size)
        circ[:m] = self.column
        if m > 1:
            circ[size - m + 1 :] = self.column[1:][::-1]
        return np.fft.rfft(circ)

    def dense(self) -> FloatArray:
        return scipy.linalg.toeplitz(self.column)

    def matvec(self, v: FloatArray) -> FloatArray:
        return toeplitz_matvec(self, v)


def toeplitz_matvec(c: ToeplitzColumn | FloatArray, v: FloatArray) -> FloatArray:
    """``T @ v`` through a zero padded circulant embedding, O(m log m) per vector.

    ``v`` may be a vector of length m or an (m, k) block.
    """
    if not isinstance(c, ToeplitzColumn):
        c = ToeplitzColumn(c)
    v = np.asarray(v, dtype=np.float64)
    m = c.m
    if v.shape[0] != m or v.ndim > 2:
        raise DimensionMismatch("Toeplitz operand", (m,), v.shape)

    size = circulant_size(m)
    spectrum = c.spectrum if v.ndim == 1 else c.spectrum[:, None]
    product = np.fft.irfft(spectrum * np.fft.rfft(v, n=size, axis=0), n=size, axis=0)
    return product[:m]
