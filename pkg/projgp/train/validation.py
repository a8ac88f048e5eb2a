from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from sklearn.model_selection import KFold

from ..config import CONFIG
from ..data import Dataset, Normalizer
from ..errors import TooFewPoints
from ..gp import fit_exact, fit_ski, log_marginal_likelihood, ski_log_marginal_likelihood
from ..models import ModelConfig, TrainedModel
from ..types import FloatArray
from ..utils.time import stopwatch
from .optimizer import TrainConfig, optimize

__all__ = (
    "FoldResult",
    "CVResult",
    "fit_model",
    "cross_validate",
)


log = logging.getLogger(__name__)


def fit_model(
    model: ModelConfig,
    X: FloatArray,
    y: FloatArray,
    train_cfg: TrainConfig | None = None,
    seed: int | None = None,
) -> TrainedModel:
    """Normalises the data, trains the hyperparameters and fits the final model."""
    normalizer = Normalizer.fit(X, y)
    if model.is_mean:
        return TrainedModel(model, normalizer, None, {"train_nll": None, "iterations": 0})

    Xn = normalizer.transform_X(X)
    yn = normalizer.transform_y(y)
    theta, trace, kernel = optimize(Xn, yn, model, train_cfg, seed)

    if model.inference == "ski":
        fit = fit_ski(Xn, yn, kernel, model.m)
        train_nll = -ski_log_marginal_likelihood(fit, seed=seed)
    else:
        fit = fit_exact(Xn, yn, kernel)
        train_nll = -log_marginal_likelihood(fit)

    info = {
        "train_nll": train_nll,
        "iterations": trace.iterations,
        "stop_reason": trace.stop_reason,
        "theta": theta.tolist(),
        "theta_names": kernel.theta_names(),
        "seed": seed,
    }
    return TrainedModel(model, normalizer, fit, info)


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold: int
    rmse: float
    train_nll: float | None
    iterations: int
    seconds: float
    n_train: int
    n_test: int
    target_mean: float
    target_std: float


@dataclass(frozen=True)
class CVResult:
    model: str
    dataset: str
    folds: list[FoldResult] = field(repr=False)

    @property
    def rmse(self) -> FloatArray:
        return np.array([fold.rmse for fold in self.folds])

    @property
    def mean(self) -> float:
        return float(self.rmse.mean())

    @property
    def two_std(self) -> float:
        return float(2 * self.rmse.std())

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(fold) for fold in self.folds])
        frame.insert(0, "dataset", self.dataset)
        frame.insert(0, "model", self.model)
        return frame

    def summary(self) -> dict:
        return {"model": self.model, "dataset": self.dataset, "rmse_mean": self.mean, "rmse_2std": self.two_std}


def _fold_seed(seed: int, repeat: int, fold: int) -> int:
    return seed + 1000 * repeat + fold


def cross_validate(
    dataset: Dataset,
    model: ModelConfig,
    folds: int | None = None,
    repeats: int | None = None,
    seed: int = 0,
    train_cfg: TrainConfig | None = None,
    threads: int = 1,
) -> CVResult:
    """Repeated k-fold cross validation with RMSE measured on the normalised targets.

    Every split is normalised with statistics of its training folds only. Folds run on
    a thread pool and are collected in (repeat, fold) order.
    """
    folds = folds or CONFIG.CV.FOLDS
    repeats = repeats or CONFIG.CV.REPEATS
    if dataset.n < folds or folds < 2:
        raise TooFewPoints(dataset.n, max(folds, 2))

    splits = [
        (repeat, fold, train, test)
        for repeat in range(repeats)
        for fold, (train, test) in enumerate(KFold(folds, shuffle=True, random_state=seed + repeat).split(dataset.X))
    ]

    def run(split: tuple[int, int, np.ndarray, np.ndarray]) -> FoldResult:
        repeat, fold, train, test = split
        with stopwatch() as watch:
            trained = fit_model(model, dataset.X[train], dataset.y[train], train_cfg, _fold_seed(seed, repeat, fold))
            prediction = trained.predict(dataset.X[test])
        normalizer = trained.normalizer
        error = normalizer.transform_y(prediction) - normalizer.transform_y(dataset.y[test])
        rmse = float(np.sqrt(np.mean(error**2)))
        log.info(
            "%s on %s, repeat %d fold %d: RMSE %.4f in %s.",
            model.name,
            dataset.name,
            repeat + 1,
            fold + 1,
            rmse,
            watch,
        )
        return FoldResult(
            repeat,
            fold,
            rmse,
            trained.info.get("train_nll"),
            trained.info.get("iterations", 0),
            watch.elapsed,
            train.size,
            test.size,
            normalizer.target_mean,
            normalizer.target_std,
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, splits))
    return CVResult(model.name, dataset.name, results)
