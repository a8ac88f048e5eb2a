from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..config import CONFIG
from ..errors import NumericalBreakdown
from ..types import FloatArray, Seed
from .operators import CGConfig, DenseOperator, SymmetricOperator

__all__ = (
    "CGResult",
    "conjugate_gradients",
    "probe_vectors",
    "lanczos_tridiagonal",
    "lanczos_logdet",
)


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CGResult:
    x: FloatArray
    iterations: int
    residual: float
    converged: bool

    def __iter__(self) -> Iterator[Any]:
        return iter((self.x, self.iterations, self.residual))


def _as_operator(A: SymmetricOperator | FloatArray) -> SymmetricOperator:
    if isinstance(A, SymmetricOperator):
        return A
    return DenseOperator(A)


def conjugate_gradients(
    A: SymmetricOperator | FloatArray,
    b: FloatArray,
    cfg: CGConfig | None = None,
) -> CGResult:
    """Solves ``A x = b`` for symmetric positive definite ``A``.

    ``b`` may hold several right hand sides as columns; each column runs its own
    recurrence and stops once its relative residual drops below the tolerance.
    The reported residual is the worst column's relative residual.
    """
    A = _as_operator(A)
    cfg = cfg or CGConfig.training()
    b = np.asarray(b, dtype=np.float64)
    single = b.ndim == 1
    B = b[:, None] if single else b

    norms = np.linalg.norm(B, axis=0)
    x = np.zeros_like(B)
    active = norms > 0
    safe_norms = np.where(active, norms, 1.0)

    def finish(iterations: int, residuals: FloatArray, converged: bool) -> CGResult:
        worst = float(np.max(residuals)) if residuals.size else 0.0
        return CGResult(x[:, 0] if single else x, iterations, worst, converged)

    if not active.any():
        return finish(0, np.zeros(B.shape[1]), True)

    if cfg.preconditioner == "diagonal":
        inverse_diagonal = 1.0 / A.diagonal()
        precondition = lambda r: inverse_diagonal[:, None] * r
    else:
        precondition = lambda r: r

    r = B.copy()
    z = precondition(r)
    p = z.copy()
    rz = np.sum(r * z, axis=0)
    residuals = np.where(active, 1.0, 0.0)

    for iteration in range(1, cfg.max_iterations + 1):
        Ap = A.apply(p)
        pAp = np.sum(p * Ap, axis=0)
        if np.any(pAp[active] <= 0):
            raise NumericalBreakdown(
                "Non-positive curvature p'Ap encountered in conjugate gradients; the operator is not positive definite.",
                iteration=iteration,
            )

        step = np.where(active, rz / np.where(active, pAp, 1.0), 0.0)
        x += step * p
        r -= step * Ap
        residuals = np.where(active, np.linalg.norm(r, axis=0) / safe_norms, residuals)
        active &= residuals > cfg.tolerance

        if not active.any():
            return finish(iteration, residuals, True)

        z = precondition(r)
        rz_new = np.sum(r * z, axis=0)
        beta = np.where(active, rz_new / np.where(rz != 0, rz, 1.0), 0.0)
        p = z + beta * p
        rz = rz_new

    log.warning(
        "Conjugate gradients stopped after %d iterations with relative residual %.3g.",
        cfg.max_iterations,
        float(np.max(residuals)),
    )
    return finish(cfg.max_iterations, residuals, False)


def probe_vectors(n: int, num_probes: int, seed: Seed = None) -> FloatArray:
    """Rademacher probes as the columns of an (n, num_probes) matrix."""
    if n < 1 or num_probes < 1:
        raise ValueError("Need n >= 1 and num_probes >= 1.")
    rng = np.random.default_rng(seed)
    return rng.choice(np.array([-1.0, 1.0]), size=(n, num_probes))


def lanczos_tridiagonal(
    A: SymmetricOperator,
    V: FloatArray,
    steps: int,
) -> list[tuple[FloatArray, FloatArray]]:
    """Runs Lanczos with full reorthogonalisation from every column of ``V``.

    Returns the (diagonal, off diagonal) of each probe's tridiagonal matrix, truncated
    at the step where that probe's Krylov space became invariant.
    """
    n, k = V.shape
    steps = min(steps, n)
    Q = np.zeros((steps, n, k))
    alphas = np.zeros((steps, k))
    betas = np.zeros((steps, k))
    lengths = np.full(k, steps)
    active = np.ones(k, dtype=bool)

    q = V / np.linalg.norm(V, axis=0)
    q_prev = np.zeros_like(q)
    beta_prev = np.zeros(k)
    breakdown = 1e-10

    for j in range(steps):
        Q[j] = q
        w = A.apply(q) - beta_prev * q_prev
        alpha = np.sum(q * w, axis=0)
        w -= alpha * q

        # twice is enough for full reorthogonalisation
        for _ in range(2):
            coefficients = np.einsum("snk,nk->sk", Q[: j + 1], w)
            w -= np.einsum("snk,sk->nk", Q[: j + 1], coefficients)

        beta = np.linalg.norm(w, axis=0)
        alphas[j] = np.where(active, alpha, 0.0)
        betas[j] = np.where(active, beta, 0.0)

        finished = active & (beta < breakdown * np.maximum(np.abs(alpha), 1.0))
        lengths[finished] = j + 1
        active &= ~finished
        if not active.any():
            break

        q_prev = q
        q = np.where(active, w / np.where(beta > 0, beta, 1.0), 0.0)
        beta_prev = np.where(active, beta, 0.0)

    return [(alphas[: lengths[i], i].copy(), betas[: lengths[i] - 1, i].copy()) for i in range(k)]


def lanczos_logdet(
    A: SymmetricOperator | FloatArray,
    num_probes: int | None = None,
    lanczos_steps: int | None = None,
    seed: Seed = None,
    probes: FloatArray | None = None,
) -> float:
    """Stochastic Lanczos quadrature estimate of ``log|A|`` for SPD ``A``."""
    A = _as_operator(A)
    num_probes = num_probes or CONFIG.LINALG.LANCZOS_PROBES
    lanczos_steps = lanczos_steps or CONFIG.LINALG.LANCZOS_STEPS
    if probes is None:
        probes = probe_vectors(A.n, num_probes, seed)

    squared_norms = np.sum(probes**2, axis=0)
    estimate = 0.0
    for norm, (diagonal, off_diagonal) in zip(squared_norms, lanczos_tridiagonal(A, probes, lanczos_steps)):
        T = np.diag(diagonal) + np.diag(off_diagonal, 1) + np.diag(off_diagonal, -1)
        eigenvalues, eigenvectors = np.linalg.eigh(T)
        if np.any(eigenvalues <= 0):
            raise NumericalBreakdown(
                "Lanczos tridiagonal has non-positive eigenvalues; the operator is not positive definite.",
                smallest=float(eigenvalues.min()),
            )
        estimate += norm * float(np.sum(eigenvectors[0] ** 2 * np.log(eigenvalues)))

    return estimate / probes.shape[1]
