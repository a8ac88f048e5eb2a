from __future__ import annotations

import logging
import pathlib
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..config import CONFIG
from ..errors import NonFiniteGradient, NotPositiveDefinite
from ..gp import exact_objective, ski_objective
from ..kernels import AdditiveKernel
from ..models import ModelConfig
from ..types import FloatArray, Inference

__all__ = (
    "NoisePrior",
    "TrainConfig",
    "AdamState",
    "TrainTrace",
    "adam_step",
    "smoothed_box_log_prior",
    "optimize",
    "optimize_kernel",
)


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoisePrior:
    lower: float = 1e-4
    upper: float = 1.0
    sharpness: float = 100.0

    def __post_init__(self) -> None:
        if not 0 < self.lower < self.upper:
            raise ValueError(f"Noise prior needs 0 < lower < upper, got [{self.lower}, {self.upper}].")
        if self.sharpness <= 0:
            raise ValueError("Noise prior sharpness must be positive.")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_iterations: int = 1000
    stop_tolerance: float = 1e-4
    stop_window: int = 20
    smoothing: int = 10
    noise_prior: NoisePrior = field(default_factory=NoisePrior)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("Learning rate must be positive.")
        if self.stop_window < 1 or self.smoothing < 1:
            raise ValueError("Stop window and smoothing width must be at least 1.")
        if self.max_iterations < 1:
            raise ValueError("Need at least one iteration.")

    @classmethod
    def from_config(cls) -> TrainConfig:
        train = CONFIG.TRAIN
        return cls(
            train.LEARNING_RATE,
            train.MAX_ITERATIONS,
            train.STOP_TOLERANCE,
            train.STOP_WINDOW,
            train.SMOOTHING,
            NoisePrior(train.NOISE_LOWER, train.NOISE_UPPER, train.NOISE_SHARPNESS),
        )


@dataclass(frozen=True)
class AdamState:
    m: FloatArray
    v: FloatArray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> AdamState:
        return cls(np.zeros(size), np.zeros(size))


BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def adam_step(
    theta: FloatArray, gradient: FloatArray, state: AdamState, lr: float
) -> tuple[FloatArray, AdamState]:
    """One Adam update minimising the function whose gradient is given."""
    gradient = np.asarray(gradient, dtype=np.float64)
    if not np.all(np.isfinite(gradient)):
        raise NonFiniteGradient("Gradient contains non-finite entries.", theta=np.asarray(theta).tolist())

    t = state.t + 1
    m = BETA1 * state.m + (1 - BETA1) * gradient
    v = BETA2 * state.v + (1 - BETA2) * gradient**2
    m_hat = m / (1 - BETA1**t)
    v_hat = v / (1 - BETA2**t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + EPSILON), AdamState(m, v, t)


def smoothed_box_log_prior(noise_variance: float, prior: NoisePrior) -> tuple[float, float]:
    """Log prior of the noise and its derivative with respect to log noise.

    Flat on [lower, upper], quadratic in log noise outside with curvature ``sharpness``.
    """
    x = np.log(noise_variance)
    lower, upper = np.log(prior.lower), np.log(prior.upper)
    if x < lower:
        excess = x - lower
    elif x > upper:
        excess = x - upper
    else:
        return 0.0, 0.0
    return float(-0.5 * prior.sharpness * excess**2), float(-prior.sharpness * excess)


@dataclass(eq=False)
class TrainTrace:
    lml: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    smoothed: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    best_iteration: int = 0
    best_theta: FloatArray | None = field(default=None, repr=False)
    stop_reason: str = "max_iterations"
    failed_theta: FloatArray | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.lml)

    @property
    def best_smoothed(self) -> float:
        return self.smoothed[self.best_iteration]

    def append(self, lml: float, objective: float, grad_norm: float, smoothing: int) -> float:
        self.lml.append(lml)
        self.objective.append(objective)
        self.grad_norm.append(grad_norm)
        window = pd.Series(self.objective[-smoothing:]).rolling(smoothing, min_periods=1).mean()
        self.smoothed.append(float(window.iloc[-1]))
        return self.smoothed[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": np.arange(self.iterations),
                "lml": self.lml,
                "objective": self.objective,
                "smoothed": self.smoothed,
                "grad_norm": self.grad_norm,
            }
        )

    def to_csv(self, path: str | pathlib.Path) -> None:
        self.to_frame().to_csv(path, index=False)


def optimize_kernel(
    kernel: AdditiveKernel,
    X: FloatArray,
    y: FloatArray,
    inference: Inference = "exact",
    train_cfg: TrainConfig | None = None,
    seed: int | None = None,
    m: int | None = None,
) -> tuple[AdditiveKernel, TrainTrace]:
    """Adam on the negative log posterior of the hyperparameters.

    Stops once the moving average of the objective improves by less than the tolerance
    over the stop window, and returns the kernel at the best moving average.
    """
    cfg = train_cfg or TrainConfig.from_config()
    rng = np.random.default_rng(seed)
    trace = TrainTrace()
    theta = kernel.theta
    state = AdamState.zeros(theta.size)
    best = -np.inf

    for iteration in range(cfg.max_iterations):
        current = kernel.with_theta(theta)
        try:
            if inference == "ski":
                lml, gradient, _ = ski_objective(current, X, y, m, seed=int(rng.integers(2**32)))
            else:
                lml, gradient, _ = exact_objective(current, X, y)
        except NotPositiveDefinite as e:
            trace.failed_theta = theta.copy()
            trace.stop_reason = "failed"
            e.context["theta"] = theta.tolist()
            e.trace = trace
            raise

        log_prior, noise_slope = smoothed_box_log_prior(current.noise_variance, cfg.noise_prior)
        gradient = gradient.copy()
        gradient[current.noise_index] += noise_slope
        value = lml + log_prior
        smoothed = trace.append(lml, value, float(np.linalg.norm(gradient)), cfg.smoothing)

        if smoothed > best:
            best = smoothed
            trace.best_iteration = iteration
            trace.best_theta = theta.copy()

        log.debug("Iteration %d: lml %.6g, objective %.6g, |grad| %.3g.", iteration, lml, value, trace.grad_norm[-1])

        if iteration >= cfg.stop_window and smoothed - trace.smoothed[iteration - cfg.stop_window] < cfg.stop_tolerance:
            trace.stop_reason = "converged"
            break

        try:
            theta, state = adam_step(theta, -gradient, state, cfg.learning_rate)
        except NonFiniteGradient as e:
            trace.failed_theta = theta.copy()
            trace.stop_reason = "failed"
            e.trace = trace
            raise

    log.debug(
        "Optimiser stopped after %d iterations (%s), best smoothed objective %.6g at iteration %d.",
        trace.iterations,
        trace.stop_reason,
        trace.best_smoothed,
        trace.best_iteration,
    )
    return kernel.with_theta(trace.best_theta), trace  # type: ignore


def optimize(
    X: FloatArray,
    y: FloatArray,
    model: ModelConfig,
    train_cfg: TrainConfig | None = None,
    seed: int | None = None,
) -> tuple[FloatArray, TrainTrace, AdditiveKernel]:
    """Trains ``model`` on normalised data, returning theta*, the trace and the fitted kernel."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    kernel = model.initial_kernel(X.shape[1], seed)
    best, trace = optimize_kernel(kernel, X, y, model.inference, train_cfg, seed, model.m)
    return best.theta, trace, best
