from __future__ import annotations

import logging

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from ..config import CONFIG
from ..errors import DimensionMismatch, NonFiniteInput, NotPositiveDefinite
from ..types import FloatArray

__all__ = (
    "cholesky_factor",
    "jittered_cholesky",
    "cholesky_solve",
    "cholesky_logdet",
)


log = logging.getLogger(__name__)


def _check_square(A: FloatArray) -> FloatArray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("matrix", "square", A.shape)
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("Matrix contains non-finite entries.")
    return A


def cholesky_factor(A: FloatArray, jitter: float = 0.0) -> FloatArray:
    """Lower triangular ``L`` with ``L @ L.T == A + jitter * I``."""
    A = _check_square(A)
    if jitter < 0:
        raise ValueError("Jitter must be nonnegative.")
    if jitter:
        A = A + jitter * np.eye(A.shape[0])

    L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(pivot=info - 1, jitter=jitter)
    if info < 0:
        raise ValueError(f"Illegal argument {-info} passed to dpotrf.")
    return L


def jittered_cholesky(
    A: FloatArray,
    *,
    start: float | None = None,
    maximum: float | None = None,
) -> tuple[FloatArray, float]:
    """Cholesky with the jitter ladder 0, start, 10*start, ... up to maximum.

    ``start`` and ``maximum`` are relative to the mean of the diagonal.
    Returns the factor and the absolute jitter that was needed.
    """
    A = _check_square(A)
    start = CONFIG.LINALG.JITTER_START if start is None else start
    maximum = CONFIG.LINALG.JITTER_MAX if maximum is None else maximum
    scale = float(np.mean(np.abs(np.diag(A)))) or 1.0

    try:
        return cholesky_factor(A), 0.0
    except NotPositiveDefinite as e:
        error = e

    relative = start
    while relative <= maximum * (1 + 1e-12):
        jitter = relative * scale
        try:
            L = cholesky_factor(A, jitter)
        except NotPositiveDefinite as e:
            error = e
            relative *= 10
            continue
        log.warning("Added jitter %.3g to the diagonal for a stable Cholesky factor.", jitter)
        return L, jitter

    raise error


def cholesky_solve(L: FloatArray, B: FloatArray) -> FloatArray:
    """Solves ``(L @ L.T) X = B`` for one or many right hand sides."""
    L = np.asarray(L, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != L.shape[0]:
        raise DimensionMismatch("right hand side rows", L.shape[0], B.shape[0])
    return scipy.linalg.cho_solve((L, True), B, check_finite=False)


def cholesky_logdet(L: FloatArray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(L))))
