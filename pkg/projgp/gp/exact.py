from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import DimensionMismatch, NonFiniteInput, NotPositiveDefinite, TooFewPoints
from ..kernels import AdditiveKernel
from ..linalg import cholesky_logdet, cholesky_solve, jittered_cholesky
from ..types import FloatArray

__all__ = (
    "ExactFit",
    "fit_exact",
    "predict",
    "log_marginal_likelihood",
    "lml_gradient",
    "exact_objective",
)


log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2 * np.pi))


def check_training_data(X: FloatArray, y: FloatArray) -> tuple[FloatArray, FloatArray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 1:
        raise TooFewPoints(X.shape[0], 1)
    if y.size != X.shape[0]:
        raise DimensionMismatch("targets", X.shape[0], y.size)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("Training data contains non-finite values.")
    return X, y


@dataclass(frozen=True, eq=False)
class ExactFit:
    """Cholesky factor of K + noise * I and the weights alpha = (K + noise * I)^-1 y."""

    kernel: AdditiveKernel
    X: FloatArray = field(repr=False)
    y: FloatArray = field(repr=False)
    L: FloatArray = field(repr=False)
    alpha: FloatArray = field(repr=False)
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def theta(self) -> FloatArray:
        return self.kernel.theta


def fit_exact(X: FloatArray, y: FloatArray, kernel: AdditiveKernel) -> ExactFit:
    X, y = check_training_data(X, y)
    K = kernel.matrix(X, noise=True)
    try:
        L, jitter = jittered_cholesky(K)
    except NotPositiveDefinite as e:
        e.context["theta"] = kernel.theta.tolist()
        raise
    alpha = cholesky_solve(L, y)
    return ExactFit(kernel, X, y, L, alpha, jitter)


def predict(fit: ExactFit, X_star: FloatArray, *, diagonal: bool = False) -> tuple[FloatArray, FloatArray]:
    """Posterior mean and covariance of the latent function at ``X_star``.

    With ``diagonal`` set only the predictive variances are returned, without
    forming the n* x n* covariance.
    """
    K_cross = fit.kernel.matrix(fit.X, X_star)
    mean = K_cross.T @ fit.alpha
    V = scipy.linalg.solve_triangular(fit.L, K_cross, lower=True, check_finite=False)
    if diagonal:
        variance = fit.kernel.diagonal(X_star) - np.sum(V**2, axis=0)
        return mean, np.maximum(variance, 0.0)
    covariance = fit.kernel.matrix(X_star) - V.T @ V
    return mean, 0.5 * (covariance + covariance.T)


def log_marginal_likelihood(fit: ExactFit, y: FloatArray | None = None) -> float:
    y = fit.y if y is None else np.asarray(y, dtype=np.float64).ravel()
    alpha = fit.alpha if y is fit.y else cholesky_solve(fit.L, y)
    return float(-0.5 * y @ alpha - 0.5 * cholesky_logdet(fit.L) - 0.5 * fit.n * LOG_2PI)


def lml_gradient(fit: ExactFit, y: FloatArray | None = None) -> FloatArray:
    """dL/dtheta = 1/2 tr((alpha alpha' - K^-1) dK/dtheta) in the kernel's log parameterisation."""
    alpha = fit.alpha if y is None else cholesky_solve(fit.L, np.asarray(y, dtype=np.float64).ravel())
    M = np.outer(alpha, alpha) - cholesky_solve(fit.L, np.eye(fit.n))
    return 0.5 * fit.kernel.contract_gradients(fit.X, M)


def exact_objective(kernel: AdditiveKernel, X: FloatArray, y: FloatArray) -> tuple[float, FloatArray, ExactFit]:
    fit = fit_exact(X, y, kernel)
    return log_marginal_likelihood(fit), lml_gradient(fit), fit
