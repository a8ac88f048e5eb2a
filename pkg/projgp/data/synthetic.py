from __future__ import annotations

import math
from collections.abc import Callable
from typing import Any

import numpy as np

from ..errors import UsageError
from ..types import Seed
from ..utils.collections import summarise_list
from .dataset import Dataset

__all__ = (
    "synth_additive_sin",
    "synth_xor_relaxation",
    "synth_rotation_invariant",
    "synth_irrelevant_features",
    "SYNTHETIC",
    "parse_synth",
)


XOR_STEEPNESS = 5.0


def _check(n: int, d: int) -> None:
    if n < 1 or d < 1:
        raise UsageError(f"Synthetic data needs n >= 1 and d >= 1, got n={n}, d={d}.")


def synth_additive_sin(n: int, d: int, noise_std: float = 0.01, seed: Seed = None) -> Dataset:
    """x ~ N(0, I_d), y = sum_i sin(x_i) + noise."""
    _check(n, d)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.sin(X).sum(axis=1) + noise_std * rng.standard_normal(n)
    return Dataset("additive-sin", X, y, metadata={"noise_std": noise_std, "seed": _seed_repr(seed)})


def synth_xor_relaxation(n: int, d: int = 2, noise_std: float = 0.01, seed: Seed = None) -> Dataset:
    """x uniform on [-1, 1]^d, y = tanh(5 x_1) tanh(5 x_2) + noise; further coordinates are unused."""
    if d < 2:
        raise UsageError(f"The XOR target needs d >= 2, got {d}.")
    _check(n, d)
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    y = np.tanh(XOR_STEEPNESS * X[:, 0]) * np.tanh(XOR_STEEPNESS * X[:, 1])
    y = y + noise_std * rng.standard_normal(n)
    return Dataset("xor-relaxation", X, y, metadata={"noise_std": noise_std, "seed": _seed_repr(seed)})


def synth_rotation_invariant(n: int, d: int, noise_std: float = 0.01, seed: Seed = None) -> Dataset:
    """x ~ N(0, I_d), y = cos(|x|) + noise."""
    _check(n, d)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.cos(np.linalg.norm(X, axis=1)) + noise_std * rng.standard_normal(n)
    return Dataset("rotation-invariant", X, y, metadata={"noise_std": noise_std, "seed": _seed_repr(seed)})


def synth_irrelevant_features(
    n: int, d: int, relevant_fraction: float = 0.5, noise_std: float = 0.01, seed: Seed = None
) -> Dataset:
    """Additive sin target over the first ceil(d * relevant_fraction) coordinates only."""
    _check(n, d)
    if not 0 < relevant_fraction <= 1:
        raise UsageError(f"Relevant fraction must be in (0, 1], got {relevant_fraction}.")
    relevant = math.ceil(d * relevant_fraction)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.sin(X[:, :relevant]).sum(axis=1) + noise_std * rng.standard_normal(n)
    metadata = {"noise_std": noise_std, "seed": _seed_repr(seed), "relevant": relevant}
    return Dataset("irrelevant-features", X, y, metadata=metadata)


def _seed_repr(seed: Seed) -> Any:
    return seed if seed is None or isinstance(seed, int) else str(seed)


SYNTHETIC: dict[str, Callable[..., Dataset]] = {
    "additive-sin": synth_additive_sin,
    "xor": synth_xor_relaxation,
    "rotation-invariant": synth_rotation_invariant,
    "irrelevant-features": synth_irrelevant_features,
}

_INTEGER_OPTIONS = {"n", "d"}


def parse_synth(text: str, seed: Seed = None) -> Dataset:
    """Builds a dataset from ``name:key=value,...``, e.g. ``additive-sin:n=500,d=10``."""
    name, _, options = text.partition(":")
    name = name.strip()
    if name not in SYNTHETIC:
        raise UsageError(f"Unknown synthetic dataset {name!r}, expected one of {summarise_list(*SYNTHETIC)}.")

    kwargs: dict[str, Any] = {}
    for option in filter(None, (part.strip() for part in options.split(","))):
        key, sep, value = option.partition("=")
        if not sep:
            raise UsageError(f"Malformed synthetic option {option!r}, expected key=value.")
        key = key.strip()
        try:
            kwargs[key] = int(value) if key in _INTEGER_OPTIONS else float(value)
        except ValueError:
            raise UsageError(f"Synthetic option {key} expects a number, got {value!r}.") from None

    kwargs.setdefault("n", 500)
    kwargs.setdefault("d", 2 if name == "xor" else 10)
    try:
        return SYNTHETIC[name](seed=seed, **kwargs)
    except TypeError as e:
        raise UsageError(f"Bad options for synthetic dataset {name!r}: {e}") from None
