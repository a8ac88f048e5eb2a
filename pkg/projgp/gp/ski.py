from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..config import CONFIG
from ..errors import UnsupportedDegree
from ..kernels import AdditiveKernel
from ..linalg import (
    CGConfig,
    MatvecOperator,
    SumOperator,
    SymmetricOperator,
    ToeplitzColumn,
    conjugate_gradients,
    lanczos_logdet,
    probe_vectors,
    toeplitz_matvec,
)
from ..types import FloatArray, Seed
from .exact import LOG_2PI, check_training_data
from .interpolation import Grid1D, SparseInterpolation, build_grid, interpolation_matrix

__all__ = (
    "SkiSystem",
    "SkiFit",
    "ski_operator",
    "additive_ski_operator",
    "build_ski_system",
    "fit_ski",
    "predict_ski",
    "ski_log_marginal_likelihood",
    "ski_objective",
)


log = logging.getLogger(__name__)


def _interpolated_diagonal(interpolation: SparseInterpolation, column: ToeplitzColumn) -> FloatArray:
    lags = np.abs(interpolation.columns[:, :, None] - interpolation.columns[:, None, :])
    w = interpolation.weights
    return np.einsum("nk,nl,nkl->n", w, w, column.column[lags])


def ski_operator(interpolation: SparseInterpolation, column: ToeplitzColumn) -> SymmetricOperator:
    """v -> W K_UU W' v through two sparse products and one Toeplitz product."""
    W = interpolation.matrix
    WT = W.T.tocsr()

    def matvec(v: FloatArray) -> FloatArray:
        return W @ toeplitz_matvec(column, WT @ v)

    return MatvecOperator(interpolation.n, matvec, _interpolated_diagonal(interpolation, column))


def additive_ski_operator(
    terms: list[SymmetricOperator], weights: FloatArray, noise_variance: float
) -> SymmetricOperator:
    """sum_j weights[j] * terms[j] + noise * I, summed in projection order."""
    return SumOperator(terms, weights, noise_variance)


def _projected(kernel: AdditiveKernel, X: FloatArray) -> list[FloatArray]:
    """1-D coordinates of every projection, before dividing by the sub-kernel lengthscale."""
    if any(D != 1 for D in kernel.projections.degrees):
        raise UnsupportedDegree("Structured interpolation only supports degree 1 projections.")
    W = kernel.scaled_inputs(X)
    return [W @ P[0] for P in kernel.projections]


def _grid_lags(kernel: AdditiveKernel, j: int, grid: Grid1D) -> FloatArray:
    lengthscale = kernel.sub_lengthscales(j)[0]
    return (np.arange(grid.m) * grid.spacing / lengthscale) ** 2


@dataclass(frozen=True, eq=False)
class SkiSystem:
    """The structured approximation of K + noise * I for one kernel on one set of inputs."""

    kernel: AdditiveKernel
    X: FloatArray = field(repr=False)
    grids: tuple[Grid1D, ...] = field(repr=False)
    interpolations: tuple[SparseInterpolation, ...] = field(repr=False)
    columns: tuple[ToeplitzColumn, ...] = field(repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def weights(self) -> FloatArray:
        return self.kernel.output_scale * self.kernel.mixing

    @cached_property
    def operator(self) -> SymmetricOperator:
        terms = [ski_operator(W, T) for W, T in zip(self.interpolations, self.columns)]
        return additive_ski_operator(terms, self.weights, self.kernel.noise_variance)

    def signal_columns(self, V: FloatArray) -> FloatArray:
        """K_signal @ V for an (n, k) block, without the noise ridge."""
        result = np.zeros_like(V)
        for weight, W, T in zip(self.weights, self.interpolations, self.columns):
            result += weight * (W.matrix @ toeplitz_matvec(T, W.matrix.T @ V))
        return result

    def bilinear_gradients(self, U: FloatArray, V: FloatArray) -> FloatArray:
        """Column averaged u' (dK/dtheta_l) v for every hyperparameter l."""
        U = np.atleast_2d(U.T).T
        V = np.atleast_2d(V.T).T
        k = U.shape[1]
        kernel = self.kernel
        s = kernel.output_scale
        derivative = kernel.subkernel_derivative

        lengthscale_grad = np.zeros(kernel.num_lengthscales)
        contractions = np.zeros(kernel.J)
        scaled = kernel.scaled_inputs(self.X) if kernel.spec.prescale else None

        for j, (grid, W, T) in enumerate(zip(self.grids, self.interpolations, self.columns)):
            WtU = W.matrix.T @ U
            WtV = W.matrix.T @ V
            TWtV = toeplitz_matvec(T, WtV)
            contractions[j] = s * np.sum(WtU * TWtV) / k
            weight = s * kernel.mixing[j]

            if kernel.spec.prescale:
                TWtU = toeplitz_matvec(T, WtU)
                Wd = W.derivative_matrix
                g = np.sum(U * (Wd @ TWtV) + V * (Wd @ TWtU), axis=1) / k
                lengthscale_grad -= weight * kernel.projections.matrices[j][0] * (scaled.T @ g)
            else:
                r2 = _grid_lags(kernel, j, grid)
                dT = ToeplitzColumn(-2.0 * r2 * derivative(r2))
                lengthscale_grad[j] += weight * np.sum(WtU * toeplitz_matvec(dT, WtV)) / k

        weighted = float(np.dot(kernel.mixing, contractions))
        parts = [lengthscale_grad, [weighted, kernel.noise_variance * np.sum(U * V) / k]]
        if kernel.spec.learn_mixing:
            parts.append(kernel.mixing * (contractions - weighted))
        return np.concatenate(parts)


def build_ski_system(
    kernel: AdditiveKernel,
    X: FloatArray,
    m: int | None = None,
    grids: tuple[Grid1D, ...] | None = None,
) -> SkiSystem:
    m = m or CONFIG.SKI.INDUCING_POINTS
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    values = _projected(kernel, X)
    if grids is None:
        grids = tuple(
            build_grid(z, m, CONFIG.SKI.PADDING_FRACTION, CONFIG.SKI.PADDING_CELLS) for z in values
        )
    derivative = kernel.spec.prescale
    interpolations = tuple(interpolation_matrix(g, z, derivative=derivative) for g, z in zip(grids, values))
    columns = tuple(
        ToeplitzColumn(kernel.subkernel(_grid_lags(kernel, j, g))) for j, g in enumerate(grids)
    )
    return SkiSystem(kernel, X, tuple(grids), interpolations, columns)


@dataclass(frozen=True, eq=False)
class SkiFit:
    system: SkiSystem
    y: FloatArray = field(repr=False)
    alpha: FloatArray = field(repr=False)
    iterations: int = 0
    residual: float = 0.0

    @property
    def kernel(self) -> AdditiveKernel:
        return self.system.kernel

    @property
    def X(self) -> FloatArray:
        return self.system.X

    @property
    def grids(self) -> tuple[Grid1D, ...]:
        return self.system.grids

    @property
    def theta(self) -> FloatArray:
        return self.kernel.theta

    @cached_property
    def grid_vectors(self) -> FloatArray:
        """(J, m) rows a_j = s * alpha_j * K_UU W_j' alpha, so predictions cost O(J) per point."""
        return np.stack(
            [
                weight * toeplitz_matvec(T, W.matrix.T @ self.alpha)
                for weight, W, T in zip(self.system.weights, self.system.interpolations, self.system.columns)
            ]
        )


def fit_ski(
    X: FloatArray,
    y: FloatArray,
    kernel: AdditiveKernel,
    m: int | None = None,
    cg_cfg: CGConfig | None = None,
    grids: tuple[Grid1D, ...] | None = None,
    alpha: FloatArray | None = None,
) -> SkiFit:
    """Structured interpolation fit; ``alpha`` skips the solve when restoring a saved fit."""
    X, y = check_training_data(X, y)
    system = build_ski_system(kernel, X, m, grids)
    if alpha is not None:
        return SkiFit(system, y, np.asarray(alpha, dtype=np.float64))
    result = conjugate_gradients(system.operator, y, cg_cfg or CGConfig.prediction())
    return SkiFit(system, y, result.x, result.iterations, result.residual)


def _rebuild_for(fit: SkiFit, values: list[FloatArray]) -> SkiFit:
    train_values = _projected(fit.kernel, fit.X)
    grids = []
    for grid, z_train, z_star in zip(fit.grids, train_values, values):
        if grid.contains(z_star):
            grids.append(grid)
        else:
            grids.append(
                build_grid(np.concatenate([z_train, z_star]), grid.m, CONFIG.SKI.PADDING_FRACTION, CONFIG.SKI.PADDING_CELLS)
            )
    log.warning("Test points fall outside the interpolation grid, rebuilding the grids and refitting.")
    return fit_ski(fit.X, fit.y, fit.kernel, grids=tuple(grids))


def predict_ski(
    fit: SkiFit,
    X_star: FloatArray,
    *,
    variance: bool = False,
    cg_cfg: CGConfig | None = None,
    batch_size: int = 256,
) -> FloatArray | tuple[FloatArray, FloatArray]:
    """Predictive mean, plus an approximate diagonal variance when ``variance`` is set."""
    values = _projected(fit.kernel, X_star)
    if not all(grid.contains(z) for grid, z in zip(fit.grids, values)):
        fit = _rebuild_for(fit, values)

    test_interpolations = [interpolation_matrix(g, z) for g, z in zip(fit.grids, values)]
    mean = np.zeros(len(values[0]))
    for W_star, a in zip(test_interpolations, fit.grid_vectors):
        mean += W_star.matrix @ a
    if not variance:
        return mean

    system = fit.system
    cg_cfg = cg_cfg or CGConfig.prediction()
    prior = np.zeros_like(mean)
    for weight, W_star, T in zip(system.weights, test_interpolations, system.columns):
        prior += weight * _interpolated_diagonal(W_star, T)

    explained = np.zeros_like(mean)
    for start in range(0, mean.size, batch_size):
        block = slice(start, start + batch_size)
        cross = np.zeros((system.n, len(mean[block])))
        for weight, W, W_star, T in zip(system.weights, system.interpolations, test_interpolations, system.columns):
            grid_block = W_star.matrix[block].T.toarray()
            cross += weight * (W.matrix @ toeplitz_matvec(T, grid_block))
        solved = conjugate_gradients(system.operator, cross, cg_cfg).x
        explained[block] = np.sum(cross * solved, axis=0)
    return mean, np.maximum(prior - explained, 0.0)


def ski_log_marginal_likelihood(
    fit: SkiFit, num_probes: int | None = None, seed: Seed = None, lanczos_steps: int | None = None
) -> float:
    """Quadratic term from the cached solve, log determinant from stochastic Lanczos quadrature."""
    num_probes = num_probes or CONFIG.SKI.REPORT_PROBES
    logdet = lanczos_logdet(fit.system.operator, num_probes, lanczos_steps, seed)
    return float(-0.5 * fit.y @ fit.alpha - 0.5 * logdet - 0.5 * fit.system.n * LOG_2PI)


def ski_objective(
    kernel: AdditiveKernel,
    X: FloatArray,
    y: FloatArray,
    m: int | None = None,
    num_probes: int | None = None,
    seed: Seed = None,
    cg_cfg: CGConfig | None = None,
) -> tuple[float, FloatArray, SkiFit]:
    """Stochastic estimates of the log marginal likelihood and its gradient.

    One block solve against [y, z_1 .. z_p] with Rademacher probes z_i gives both the
    quadratic term and the Hutchinson trace estimate of tr(K^-1 dK); the same probes
    seed the Lanczos log determinant.
    """
    X, y = check_training_data(X, y)
    num_probes = num_probes or CONFIG.SKI.TRAIN_PROBES
    system = build_ski_system(kernel, X, m)
    Z = probe_vectors(system.n, num_probes, seed)

    result = conjugate_gradients(system.operator, np.column_stack([y, Z]), cg_cfg or CGConfig.training())
    alpha, solved = result.x[:, 0], result.x[:, 1:]

    gradient = 0.5 * system.bilinear_gradients(alpha, alpha) - 0.5 * system.bilinear_gradients(solved, Z)
    logdet = lanczos_logdet(system.operator, probes=Z)
    lml = float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * system.n * LOG_2PI)
    return lml, gradient, SkiFit(system, y, alpha, result.iterations, result.residual)
