from __future__ import annotations

import logging
import math
import pathlib
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import InvalidDelta, UnsupportedFamily
from .kernels import cosine_subkernel, imq, rbf
from .types import Family, FloatArray, Seed

__all__ = (
    "DEFAULT_LAGS",
    "ConvergenceReport",
    "empirical_expected_kernel",
    "closed_form_expected",
    "bernstein_bound",
    "rbf_projection_variance",
    "loglog_slope",
    "convergence_report",
    "bernstein_violations",
)


log = logging.getLogger(__name__)

DEFAULT_LAGS = (0.0, 0.25, 0.5, 1.0, 2.0, 5.0)
DEFAULT_DIMENSION = 10
BATCH = 100_000


def _subkernel(family: Family):
    if family == "rbf":
        return lambda t: rbf(t[..., None])
    if family == "cosine":
        return cosine_subkernel
    raise UnsupportedFamily(f"No expected kernel for sub-kernel family {family!r}.", family=family)


def empirical_expected_kernel(
    family: Family,
    d: int,
    J: int,
    lags: Sequence[float] = DEFAULT_LAGS,
    seed: Seed = None,
) -> FloatArray:
    """Mean of phi(eta_j' tau) over J directions eta_j ~ N(0, I_d), for each lag norm |tau|.

    The lag direction is a seeded random unit vector; by isotropy only its norm matters.
    """
    if J < 1 or d < 1:
        raise ValueError(f"Need J >= 1 and d >= 1, got J={J}, d={d}.")
    phi = _subkernel(family)
    lags = np.asarray(lags, dtype=np.float64)
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)

    total = np.zeros(lags.size)
    for start in range(0, J, BATCH):
        eta = rng.standard_normal((min(BATCH, J - start), d))
        t = np.outer(eta @ direction, lags)
        total += phi(t).sum(axis=0)
    return total / J


def closed_form_expected(family: Family, lag: float | FloatArray) -> FloatArray:
    """The J -> infinity limit: IMQ for RBF sub-kernels, RBF for cosine sub-kernels."""
    lag = np.asarray(lag, dtype=np.float64)
    if family == "rbf":
        return imq(lag[..., None])
    if family == "cosine":
        return rbf(lag[..., None])
    raise UnsupportedFamily(f"No closed form expected kernel for family {family!r}.", family=family)


def bernstein_bound(J: int, delta: float, n: int, v_sup: float) -> float:
    """Deviation bound holding with probability at least 1 - delta over n lags."""
    if not 0 < delta < 1:
        raise InvalidDelta(f"delta must lie in (0, 1), got {delta}.", delta=delta)
    if J < 1 or n < 1 or v_sup < 0:
        raise ValueError(f"Need J >= 1, n >= 1 and v_sup >= 0, got J={J}, n={n}, v_sup={v_sup}.")
    return 2.0 / (3.0 * J) * (math.log(1.0 / delta) + 2.0 * math.log(n) + 1.0) + math.sqrt(2.0 * v_sup / J)


def rbf_projection_variance(r: float | FloatArray) -> FloatArray:
    """Variance of an RBF sub-kernel over Gaussian directions at lag norm r."""
    r = np.asarray(r, dtype=np.float64)
    return np.maximum(1.0 / np.sqrt(1.0 + 2.0 * r**2) - 1.0 / (1.0 + r**2), 0.0)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float | None:
    if len(x) < 2:
        return None
    slope, _ = np.polyfit(np.log(np.asarray(x, dtype=np.float64)), np.log(np.asarray(y, dtype=np.float64)), 1)
    return float(slope)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    family: Family
    J_values: tuple[int, ...]
    lags: tuple[float, ...]
    # (len(J_values), len(lags)), averaged over repeats
    empirical: FloatArray = field(repr=False)
    max_deviation: FloatArray = field(repr=False)
    slope: float | None
    seed: int | None
    d: int = DEFAULT_DIMENSION
    repeats: int = 1

    @property
    def closed_form(self) -> FloatArray:
        return closed_form_expected(self.family, np.asarray(self.lags))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for J, values in zip(self.J_values, self.empirical):
            for lag, value, exact in zip(self.lags, values, self.closed_form):
                rows.append(
                    {"J": J, "lag": lag, "empirical": value, "closed_form": exact, "abs_error": abs(value - exact)}
                )
        return pd.DataFrame(rows)

    def to_csv(self, path: str | pathlib.Path) -> None:
        self.to_frame().to_csv(path, index=False)

    def summary(self) -> dict:
        return {
            "family": self.family,
            "J": list(self.J_values),
            "max_deviation": self.max_deviation.tolist(),
            "slope": self.slope,
            "seed": self.seed,
            "d": self.d,
            "repeats": self.repeats,
        }


def convergence_report(
    family: Family,
    J_values: Sequence[int],
    lags: Sequence[float] = DEFAULT_LAGS,
    d: int = DEFAULT_DIMENSION,
    seed: int | None = None,
    repeats: int = 1,
) -> ConvergenceReport:
    """Monte Carlo expected kernels against the closed form for every J.

    The max deviation for a J is the max over lags, averaged over ``repeats``
    independent estimates; the slope is fitted to it on log-log axes.
    """
    exact = closed_form_expected(family, np.asarray(lags))
    sequences = np.random.SeedSequence(seed).spawn(len(J_values) * repeats)

    empirical = np.zeros((len(J_values), len(lags)))
    deviation = np.zeros(len(J_values))
    for i, J in enumerate(J_values):
        for r in range(repeats):
            values = empirical_expected_kernel(family, d, J, lags, sequences[i * repeats + r])
            empirical[i] += values / repeats
            deviation[i] += np.max(np.abs(values - exact)) / repeats
        log.info("J=%d: max deviation %.3g.", J, deviation[i])

    slope = loglog_slope(J_values, deviation) if np.all(deviation > 0) else None
    return ConvergenceReport(family, tuple(J_values), tuple(lags), empirical, deviation, slope, seed, d, repeats)


def bernstein_violations(
    J_values: Sequence[int],
    trials: int = 1000,
    delta: float = 0.01,
    lags: Sequence[float] = DEFAULT_LAGS,
    d: int = DEFAULT_DIMENSION,
    seed: int | None = None,
) -> pd.DataFrame:
    """Fraction of seeded trials where the RBF deviation exceeds the bound, per J."""
    exact = closed_form_expected("rbf", np.asarray(lags))
    v_sup = float(np.max(rbf_projection_variance(np.asarray(lags))))
    rows = []
    for J in J_values:
        bound = bernstein_bound(J, delta, len(lags), v_sup)
        sequences = np.random.SeedSequence([seed or 0, J]).spawn(trials)
        violations = sum(
            np.max(np.abs(empirical_expected_kernel("rbf", d, J, lags, sequence) - exact)) > bound
            for sequence in sequences
        )
        rows.append({"J": J, "bound": bound, "trials": trials, "violations": int(violations), "rate": violations / trials})
        log.info("J=%d: %d of %d trials exceed the bound %.3g.", J, violations, trials, bound)
    return pd.DataFrame(rows)
