from __future__ import annotations

import dataclasses
import json
import logging
import pathlib
import re
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data import Normalizer
from .errors import DimensionMismatch, InvalidDegrees, UnsupportedDegree, UsageError
from .gp import ExactFit, Grid1D, SkiFit, fit_ski, predict, predict_ski
from .kernels import AdditiveKernel, KernelSpec
from .projections import ProjectionSet, diverse_directions, sample_gaussian
from .types import Family, FloatArray, Inference, Method
from .utils.collections import summarise_list

__all__ = (
    "ModelConfig",
    "MODELS",
    "MEAN_MODEL",
    "parse_degrees",
    "TrainedModel",
)


log = logging.getLogger(__name__)

MEAN_MODEL = "mean"
FORMAT_VERSION = 1
MAGIC = b"PROJGP01"


def parse_degrees(text: str) -> tuple[int, ...]:
    """Expands a degree schedule such as ``4x1,4x2,4x3`` (count x degree) or ``1,2,2``."""
    degrees: list[int] = []
    for part in filter(None, (part.strip() for part in text.split(","))):
        match = re.fullmatch(r"(?:(\d+)\s*[x*]\s*)?(\d+)", part)
        if match is None:
            raise InvalidDegrees(f"Cannot read degree schedule entry {part!r}.")
        count = int(match.group(1) or 1)
        degree = int(match.group(2))
        if count < 1 or degree < 1:
            raise InvalidDegrees(f"Degree schedule entry {part!r} must be positive.")
        degrees += [degree] * count
    if not degrees:
        raise InvalidDegrees("Empty degree schedule.")
    return tuple(degrees)


@dataclass(frozen=True)
class ModelConfig:
    """A named model: how projections are made, their degrees, pre-scaling and inference.

    ``method`` is None for the mean predictor. Identity and axis layouts take their
    degrees from the data dimension, so ``degrees`` is empty for them.
    """

    name: str
    method: Method | None
    degrees: tuple[int, ...] = ()
    family: Family = "rbf"
    prescale: bool = False
    inference: Inference = "exact"
    m: int | None = None
    learn_mixing: bool = False

    def __post_init__(self) -> None:
        if self.inference == "ski" and any(D != 1 for D in self.degrees):
            raise UnsupportedDegree(f"Model {self.name!r} uses structured interpolation with degrees above 1.")
        if self.method == "diverse" and any(D != 1 for D in self.degrees):
            raise InvalidDegrees("Diversified projections are one dimensional.")

    @classmethod
    def from_name(
        cls,
        name: str,
        *,
        J: int | None = None,
        degrees: tuple[int, ...] | None = None,
        m: int | None = None,
        learn_mixing: bool = False,
    ) -> ModelConfig:
        try:
            config = MODELS[name]
        except KeyError:
            raise UsageError(f"Unknown model {name!r}, expected one of {summarise_list(*MODELS, max_items=20)}.") from None

        changes: dict[str, Any] = {"learn_mixing": learn_mixing}
        if J is not None or degrees is not None:
            if config.method not in ("gaussian", "diverse"):
                raise UsageError(f"Model {name!r} has a fixed projection layout.")
            if degrees is None:
                degrees = (1,) * J  # type: ignore
            elif J is not None and len(degrees) != J:
                raise InvalidDegrees(f"Got {len(degrees)} degrees for J={J}.")
            changes["degrees"] = degrees
        if m is not None:
            changes["m"] = m
        return dataclasses.replace(config, **changes)

    @property
    def is_mean(self) -> bool:
        return self.method is None

    @property
    def J(self) -> int | None:
        return len(self.degrees) or None

    def build_projections(self, d: int, seed: int | None = None) -> ProjectionSet:
        if self.method == "identity":
            return ProjectionSet.identity(d)
        if self.method == "axis":
            return ProjectionSet.axis(d)
        if self.method == "gaussian":
            return sample_gaussian(len(self.degrees), self.degrees, d, seed)
        if self.method == "diverse":
            return diverse_directions(len(self.degrees), d, seed)
        raise UsageError(f"Model {self.name!r} has no projections.")

    def initial_kernel(self, d: int, seed: int | None = None) -> AdditiveKernel:
        projections = self.build_projections(d, seed)
        spec = KernelSpec.initial(projections, self.family, prescale=self.prescale, learn_mixing=self.learn_mixing)
        return AdditiveKernel(projections, spec)

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data["degrees"] = list(self.degrees)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelConfig:
        return cls(**{**data, "degrees": tuple(data.get("degrees", ()))})


_TWENTY = (1,) * 20

MODELS: dict[str, ModelConfig] = {
    config.name: config
    for config in (
        ModelConfig(MEAN_MODEL, None),
        ModelConfig("rbf-ard", "identity"),
        ModelConfig("imq-ard", "identity", family="imq"),
        ModelConfig("gam", "axis"),
        ModelConfig("single-rp", "gaussian", (1,)),
        ModelConfig("rpa-gp-1", "gaussian", _TWENTY),
        ModelConfig("rpa-gp-2", "gaussian", parse_degrees("4x1,4x2,4x3")),
        ModelConfig("rpa-gp-3", "gaussian", parse_degrees("3x1,3x2,3x3,2x4,2x5,1x6")),
        ModelConfig("rpa-gp-ski", "gaussian", _TWENTY, inference="ski"),
        ModelConfig("dpa-gp", "diverse", _TWENTY),
        ModelConfig("rpa-gp-ard", "gaussian", _TWENTY, prescale=True),
        ModelConfig("dpa-gp-ard", "diverse", _TWENTY, prescale=True),
        ModelConfig("dpa-gp-ard-ski", "diverse", _TWENTY, prescale=True, inference="ski"),
    )
}


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted model on the original data scale.

    Saved as an 8 byte magic, a little endian u64 header length, a UTF-8 JSON header
    and little endian float64 blocks in the order the header lists them.
    """

    config: ModelConfig
    normalizer: Normalizer
    fit: ExactFit | SkiFit | None = field(default=None, repr=False)
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.normalizer.feature_mean.size

    def predict(self, X: FloatArray, *, variance: bool = False) -> FloatArray | tuple[FloatArray, FloatArray]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d:
            raise DimensionMismatch("input dimension", self.d, X.shape[1])
        Xn = self.normalizer.transform_X(X)

        if self.fit is None:
            mean = np.zeros(X.shape[0])
            var = np.ones(X.shape[0])
        elif isinstance(self.fit, ExactFit):
            mean, var = predict(self.fit, Xn, diagonal=True)
        else:
            if variance:
                mean, var = predict_ski(self.fit, Xn, variance=True)  # type: ignore
            else:
                mean, var = predict_ski(self.fit, Xn), None  # type: ignore

        mean = self.normalizer.inverse_y(mean)
        if not variance:
            return mean
        return mean, np.asarray(var) * self.normalizer.target_std**2

    # region: Persistence

    def _blocks(self) -> dict[str, FloatArray]:
        if self.fit is None:
            return {}
        blocks = {"X": self.fit.X, "y": self.fit.y, "alpha": self.fit.alpha}
        if isinstance(self.fit, ExactFit):
            blocks["cholesky"] = self.fit.L
        return blocks

    def _header(self, blocks: dict[str, FloatArray]) -> dict[str, Any]:
        header: dict[str, Any] = {
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "normalizer": self.normalizer.to_dict(),
            "info": self.info,
            "blocks": [{"name": name, "shape": list(array.shape)} for name, array in blocks.items()],
        }
        if self.fit is not None:
            header["kernel"] = self.fit.kernel.to_dict()
        if isinstance(self.fit, ExactFit):
            header["jitter"] = self.fit.jitter
        elif isinstance(self.fit, SkiFit):
            header["grids"] = [grid.to_dict() for grid in self.fit.grids]
        return header

    def save(self, path: str | pathlib.Path) -> None:
        blocks = self._blocks()
        header = json.dumps(self._header(blocks)).encode("utf-8")
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<Q", len(header)))
            f.write(header)
            for array in blocks.values():
                f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
        log.info("Saved %s model to %s.", self.config.name, path)

    @classmethod
    def load(cls, path: str | pathlib.Path) -> TrainedModel:
        with open(path, "rb") as f:
            if f.read(len(MAGIC)) != MAGIC:
                raise UsageError(f"{path} is not a saved projgp model.")
            (length,) = struct.unpack("<Q", f.read(8))
            header = json.loads(f.read(length).decode("utf-8"))
            blocks = {}
            for block in header["blocks"]:
                shape = tuple(block["shape"])
                count = int(np.prod(shape))
                data = np.frombuffer(f.read(8 * count), dtype="<f8")
                if data.size != count:
                    raise UsageError(f"{path} is truncated.")
                blocks[block["name"]] = data.reshape(shape).astype(np.float64)

        if header.get("version") != FORMAT_VERSION:
            raise UsageError(f"Unsupported model file version {header.get('version')!r}.")
        config = ModelConfig.from_dict(header["config"])
        normalizer = Normalizer.from_dict(header["normalizer"])

        fit: ExactFit | SkiFit | None = None
        if "kernel" in header:
            kernel = AdditiveKernel.from_dict(header["kernel"])
            if config.inference == "exact":
                fit = ExactFit(kernel, blocks["X"], blocks["y"], blocks["cholesky"], blocks["alpha"], header["jitter"])
            else:
                grids = tuple(Grid1D(**grid) for grid in header["grids"])
                fit = fit_ski(blocks["X"], blocks["y"], kernel, grids=grids, alpha=blocks["alpha"])
        return cls(config, normalizer, fit, header.get("info", {}))

    # endregion
