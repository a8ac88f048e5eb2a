from __future__ import annotations

from collections.abc import Callable

import numpy as np

from ..errors import UnsupportedFamily
from ..types import Family, FloatArray

__all__ = (
    "rbf",
    "imq",
    "cosine_subkernel",
    "FAMILIES",
    "profile",
    "profile_derivative",
)


FAMILIES: tuple[Family, ...] = ("rbf", "imq", "cosine")


def _scaled_sqnorm(tau: FloatArray | float, lengthscales: FloatArray | float) -> FloatArray:
    tau = np.asarray(tau, dtype=np.float64)
    lengthscales = np.asarray(lengthscales, dtype=np.float64)
    if np.any(lengthscales <= 0):
        raise ValueError("Lengthscales must be positive.")
    scaled = tau / lengthscales
    if scaled.ndim == 0:
        return scaled**2
    return np.sum(scaled**2, axis=-1)


def rbf(tau: FloatArray | float, lengthscales: FloatArray | float = 1.0) -> FloatArray:
    """exp(-|tau / l|^2 / 2) for a lag vector, or the last axis of a batch of lags."""
    return np.exp(-0.5 * _scaled_sqnorm(tau, lengthscales))


def imq(tau: FloatArray | float, lengthscales: FloatArray | float = 1.0) -> FloatArray:
    """Inverse multiquadratic kernel 1 / sqrt(1 + |tau / l|^2)."""
    return 1.0 / np.sqrt(1.0 + _scaled_sqnorm(tau, lengthscales))


def cosine_subkernel(t: FloatArray | float) -> FloatArray:
    return np.cos(t)


# Kernels as functions of the squared scaled distance r2, with d k / d r2 for gradients.


def _rbf_profile(r2: FloatArray) -> FloatArray:
    return np.exp(-0.5 * r2)


def _rbf_derivative(r2: FloatArray) -> FloatArray:
    return -0.5 * np.exp(-0.5 * r2)


def _imq_profile(r2: FloatArray) -> FloatArray:
    return 1.0 / np.sqrt(1.0 + r2)


def _imq_derivative(r2: FloatArray) -> FloatArray:
    return -0.5 * (1.0 + r2) ** -1.5


def _cosine_profile(r2: FloatArray) -> FloatArray:
    return np.cos(np.sqrt(r2))


def _cosine_derivative(r2: FloatArray) -> FloatArray:
    r = np.sqrt(r2)
    with np.errstate(invalid="ignore", divide="ignore"):
        value = -np.sin(r) / (2.0 * r)
    return np.where(r > 1e-8, value, -0.5 + r2 / 12.0)


_PROFILES: dict[str, tuple[Callable[[FloatArray], FloatArray], Callable[[FloatArray], FloatArray]]] = {
    "rbf": (_rbf_profile, _rbf_derivative),
    "imq": (_imq_profile, _imq_derivative),
    "cosine": (_cosine_profile, _cosine_derivative),
}


def profile(family: Family) -> Callable[[FloatArray], FloatArray]:
    try:
        return _PROFILES[family][0]
    except KeyError:
        raise UnsupportedFamily(f"Unknown kernel family {family!r}.", family=family) from None


def profile_derivative(family: Family) -> Callable[[FloatArray], FloatArray]:
    try:
        return _PROFILES[family][1]
    except KeyError:
        raise UnsupportedFamily(f"Unknown kernel family {family!r}.", family=family) from None
