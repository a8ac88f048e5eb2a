from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import CONFIG
from .errors import DegenerateDirection, DimensionMismatch, EmptyProjectionSet, InvalidDegrees, OptimizerDiverged
from .types import FloatArray, Method

__all__ = (
    "ProjectionSet",
    "DescentConfig",
    "sample_gaussian",
    "separation_distance",
    "diversity_loss",
    "diverse_directions",
)


log = logging.getLogger(__name__)

UNIT_NORM_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """J projection matrices of shape (D_j, d) plus how they were made."""

    matrices: tuple[FloatArray, ...] = field(repr=False)
    method: Method
    seed: int | None = None
    trace: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if not self.matrices:
            raise EmptyProjectionSet("A projection set needs at least one projection.")
        matrices = tuple(np.atleast_2d(np.asarray(P, dtype=np.float64)) for P in self.matrices)
        d = matrices[0].shape[1]
        for P in matrices:
            if P.ndim != 2 or P.shape[1] != d:
                raise DimensionMismatch("projection matrix columns", d, P.shape)
        object.__setattr__(self, "matrices", matrices)

    @property
    def J(self) -> int:
        return len(self.matrices)

    @property
    def d(self) -> int:
        return self.matrices[0].shape[1]

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(P.shape[0] for P in self.matrices)

    def directions(self) -> FloatArray:
        """All projections stacked as a (J, d) matrix; only valid when every degree is 1."""
        if any(D != 1 for D in self.degrees):
            raise InvalidDegrees("Directions are only defined for degree 1 projections.")
        return np.vstack(self.matrices)

    def __iter__(self):
        return iter(self.matrices)

    def __len__(self) -> int:
        return self.J

    @classmethod
    def axis(cls, d: int) -> ProjectionSet:
        """One projection per input coordinate, the additive (GAM) layout."""
        return cls(tuple(np.eye(d)[i : i + 1] for i in range(d)), "axis")

    @classmethod
    def identity(cls, d: int) -> ProjectionSet:
        """A single full rank projection, the plain ARD layout."""
        return cls((np.eye(d),), "identity")

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "seed": self.seed,
            "matrices": [P.tolist() for P in self.matrices],
            "trace": list(self.trace),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ProjectionSet:
        return cls(
            tuple(np.asarray(P, dtype=np.float64) for P in data["matrices"]),
            data["method"],
            data.get("seed"),
            tuple(data.get("trace", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, payload: str) -> ProjectionSet:
        return cls.from_dict(json.loads(payload))


@dataclass(frozen=True)
class DescentConfig:
    step: float = 0.1
    max_steps: int = 2000
    tolerance: float = 1e-12
    patience: int = 50

    @classmethod
    def from_config(cls) -> DescentConfig:
        return cls(
            CONFIG.PROJECTIONS.STEP,
            CONFIG.PROJECTIONS.MAX_STEPS,
            CONFIG.PROJECTIONS.TOLERANCE,
            CONFIG.PROJECTIONS.DIVERGENCE_PATIENCE,
        )


def sample_gaussian(J: int, degrees: int | Sequence[int], d: int, seed: int | None = None) -> ProjectionSet:
    """Gaussian projections with entries drawn from N(0, 1 / D_j)."""
    if J < 1 or d < 1:
        raise InvalidDegrees(f"Need J >= 1 and d >= 1, got J={J}, d={d}.")
    if isinstance(degrees, int):
        degrees = [degrees] * J
    if len(degrees) != J:
        raise InvalidDegrees(f"Got {len(degrees)} degrees for {J} projections.")
    for D in degrees:
        if D < 1 or D > d:
            raise InvalidDegrees(f"Projection degree {D} outside [1, {d}].")

    rng = np.random.default_rng(seed)
    matrices = tuple(rng.normal(0.0, np.sqrt(1.0 / D), size=(D, d)) for D in degrees)
    return ProjectionSet(matrices, "gaussian", seed)


def _check_unit(directions: FloatArray) -> FloatArray:
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
        raise DegenerateDirection(f"Directions must have unit norm, got norms {norms}.")
    return directions


def _normalise(directions: FloatArray) -> FloatArray:
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def separation_distance(directions: FloatArray) -> float:
    """Smallest angle between any two directions, with each direction identified with its antipode."""
    directions = _check_unit(directions)
    if directions.shape[0] < 2:
        raise DegenerateDirection("Separation distance needs at least two directions.")
    cosines = np.clip(np.abs(directions @ directions.T), 0.0, 1.0)
    np.fill_diagonal(cosines, 0.0)
    return float(np.arccos(cosines.max()))


def diversity_loss(directions: FloatArray) -> tuple[float, FloatArray]:
    """Sum of fourth powers of pairwise inner products over ordered pairs, and its gradient."""
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    inner = directions @ directions.T
    np.fill_diagonal(inner, 0.0)
    loss = float(np.sum(inner**4))
    gradient = 8.0 * (inner**3) @ directions
    return loss, gradient


def _descend(directions: FloatArray, cfg: DescentConfig) -> tuple[FloatArray, list[float]]:
    loss, gradient = diversity_loss(directions)
    trace = [loss]
    step = cfg.step
    rejections = 0

    for _ in range(cfg.max_steps):
        candidate = _normalise(directions - step * gradient)
        if np.max(np.abs(np.linalg.norm(candidate, axis=1) - 1.0)) > UNIT_NORM_TOLERANCE:
            raise OptimizerDiverged("Directions left the unit sphere during descent.")

        candidate_loss, candidate_gradient = diversity_loss(candidate)
        if not np.isfinite(candidate_loss):
            raise OptimizerDiverged("Diversity loss became non-finite.", step=step)

        if candidate_loss > loss:
            rejections += 1
            if rejections >= cfg.patience:
                raise OptimizerDiverged(
                    f"Diversity loss increased for {rejections} consecutive steps.", step=step, loss=loss
                )
            step /= 2
            continue

        rejections = 0
        improvement = loss - candidate_loss
        directions, loss, gradient = candidate, candidate_loss, candidate_gradient
        trace.append(loss)
        if improvement < cfg.tolerance:
            break

    return directions, trace


def diverse_directions(J: int, d: int, seed: int | None = None, gd_config: DescentConfig | None = None) -> ProjectionSet:
    """Unit directions spread over the sphere.

    For J <= d the directions are an orthonormal frame from Gram-Schmidt on Gaussian
    vectors. Otherwise normalised Gaussian directions are moved by projected gradient
    descent on the diversity loss with a halving line search.
    """
    if J < 1 or d < 1:
        raise InvalidDegrees(f"Need J >= 1 and d >= 1, got J={J}, d={d}.")
    gd_config = gd_config or DescentConfig.from_config()
    rng = np.random.default_rng(seed)
    initial = rng.normal(size=(J, d))

    if J <= d:
        q, r = np.linalg.qr(initial.T)
        directions = (q * np.sign(np.diag(r))).T
        trace = [diversity_loss(directions)[0]]
    else:
        directions, trace = _descend(_normalise(initial), gd_config)
        log.debug("Diversified %d directions in R^%d: loss %.6g -> %.6g.", J, d, trace[0], trace[-1])

    return ProjectionSet(tuple(directions[j : j + 1] for j in range(J)), "diverse", seed, tuple(trace))
