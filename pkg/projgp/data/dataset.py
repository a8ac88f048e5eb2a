from __future__ import annotations

import json
import logging
import pathlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from ..errors import DimensionMismatch, MissingTarget, NonFiniteInput, NonFiniteValue, ParseError, TooFewPoints
from ..types import FloatArray

__all__ = (
    "Dataset",
    "Normalizer",
    "load_csv",
    "save_csv",
)


log = logging.getLogger(__name__)

CONSTANT_STD = 1e-12


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    X: FloatArray = field(repr=False)
    y: FloatArray = field(repr=False)
    feature_names: tuple[str, ...] | None = None
    target_name: str = "y"
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise TooFewPoints(X.shape[0], 1)
        if y.size != X.shape[0]:
            raise DimensionMismatch("targets", X.shape[0], y.size)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteInput(f"Dataset {self.name!r} contains non-finite values.")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DimensionMismatch("feature names", X.shape[1], len(self.feature_names))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, index: np.ndarray) -> Dataset:
        return Dataset(self.name, self.X[index], self.y[index], self.feature_names, self.target_name, self.metadata)

    def to_frame(self) -> pd.DataFrame:
        columns = self.feature_names or tuple(f"x{i + 1}" for i in range(self.d))
        frame = pd.DataFrame(self.X, columns=list(columns))
        frame[self.target_name] = self.y
        return frame

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "n": self.n,
            "d": self.d,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
            "target_name": self.target_name,
            **self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.describe())


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Z-scores features and targets with statistics from a training split."""

    feature_mean: FloatArray = field(repr=False)
    feature_std: FloatArray = field(repr=False)
    target_mean: float = 0.0
    target_std: float = 1.0

    @classmethod
    def fit(cls, X: FloatArray, y: FloatArray) -> Normalizer:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        feature_std = X.std(axis=0)
        feature_std = np.where(feature_std < CONSTANT_STD, 1.0, feature_std)
        target_std = float(y.std())
        return cls(X.mean(axis=0), feature_std, float(y.mean()), target_std if target_std >= CONSTANT_STD else 1.0)

    @classmethod
    def identity(cls, d: int) -> Normalizer:
        return cls(np.zeros(d), np.ones(d))

    def transform_X(self, X: FloatArray) -> FloatArray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_mean.size:
            raise DimensionMismatch("input dimension", self.feature_mean.size, X.shape[1])
        return (X - self.feature_mean) / self.feature_std

    def transform_y(self, y: FloatArray) -> FloatArray:
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def inverse_X(self, X: FloatArray) -> FloatArray:
        return np.asarray(X) * self.feature_std + self.feature_mean

    def inverse_y(self, y: FloatArray) -> FloatArray:
        return np.asarray(y) * self.target_std + self.target_mean

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "target_mean": self.target_mean,
            "target_std": self.target_std,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Normalizer:
        return cls(
            np.asarray(data["feature_mean"], dtype=np.float64),
            np.asarray(data["feature_std"], dtype=np.float64),
            float(data["target_mean"]),
            float(data["target_std"]),
        )


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(
    path: str | pathlib.Path,
    target_column: str | int | None = None,
    delimiter: str = ",",
    header: bool | None = None,
    *,
    require_target: bool = True,
) -> Dataset:
    """Reads a numeric CSV file.

    The header row is detected when ``header`` is None: the first row is a header if any
    of its cells is not a number. ``target_column`` is a column name or a 0-based index
    and defaults to the last column. Errors name 1-based data rows (header excluded) and
    1-based columns. With ``require_target`` unset every column is a feature and the
    targets are left at zero.
    """
    path = pathlib.Path(path)
    try:
        raw = pd.read_csv(
            path,
            sep=delimiter,
            header=None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise TooFewPoints(0, 1) from None
    if raw.empty:
        raise TooFewPoints(0, 1)

    if header is None:
        header = not all(_is_number(cell) for cell in raw.iloc[0])
    if header:
        names = [str(cell).strip() for cell in raw.iloc[0]]
        raw = raw.iloc[1:].reset_index(drop=True)
    else:
        names = [f"x{i + 1}" for i in range(raw.shape[1])]
    if raw.empty:
        raise TooFewPoints(0, 1)

    values = np.empty(raw.shape, dtype=np.float64)
    for column in range(raw.shape[1]):
        cells = raw.iloc[:, column].str.strip()
        parsed = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=np.float64)
        for row in np.flatnonzero(np.isnan(parsed)):
            cell = cells.iloc[row]
            if cell and not _is_number(cell):
                raise ParseError(int(row) + 1, column + 1, cell)
            raise NonFiniteValue(int(row) + 1, column + 1)
        infinite = np.flatnonzero(np.isinf(parsed))
        if infinite.size:
            raise NonFiniteValue(int(infinite[0]) + 1, column + 1)
        # float parsing keeps save_csv output bit-exact
        values[:, column] = cells.astype(np.float64).to_numpy()

    if not require_target:
        return Dataset(path.stem, values, np.zeros(values.shape[0]), tuple(names), metadata={"source": str(path)})

    if target_column is None:
        target_index = len(names) - 1
    elif isinstance(target_column, int) or (isinstance(target_column, str) and target_column.isdigit() and not header):
        target_index = int(target_column)
        if not 0 <= target_index < len(names):
            raise MissingTarget(target_column)
    elif target_column in names:
        target_index = names.index(target_column)
    else:
        raise MissingTarget(target_column)

    if len(names) < 2:
        raise DimensionMismatch("columns", "at least one feature and a target", len(names))
    features = [i for i in range(len(names)) if i != target_index]
    log.info("Loaded %d rows with %d features from %s.", values.shape[0], len(features), path)
    return Dataset(
        path.stem,
        values[:, features],
        values[:, target_index],
        tuple(names[i] for i in features),
        names[target_index],
        {"source": str(path)},
    )


def save_csv(dataset: Dataset, path: str | pathlib.Path, delimiter: str = ",") -> None:
    dataset.to_frame().to_csv(path, sep=delimiter, index=False, float_format="%.17g")
