from __future__ import annotations

import argparse
import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import pandas as pd
import psutil

from ..analysis import DEFAULT_LAGS, bernstein_violations, convergence_report, loglog_slope
from ..config import CONFIG
from ..data import Dataset, Normalizer, load_csv, parse_synth, save_csv, synth_additive_sin
from ..errors import UsageError
from ..models import ModelConfig, TrainedModel, parse_degrees
from ..train import TrainConfig, cross_validate, fit_model, optimize_kernel
from ..utils.collections import deduplicate
from ..utils.files import prepare_output
from ..utils.strings import plural
from ..utils.time import stopwatch
from .report import ExperimentReport

__all__ = (
    "Command",
    "COMMANDS",
    "command",
    "cmd_cv",
    "cmd_ablate_j",
    "cmd_kernel_convergence",
    "cmd_bench_runtime",
    "cmd_fit",
    "cmd_predict",
    "cmd_gen_data",
)


log = logging.getLogger(__name__)


@dataclass
class Command:
    name: str
    callback: Callable[[argparse.Namespace], ExperimentReport | None]
    help: str
    arguments: list[Callable[[argparse.ArgumentParser], None]] = field(default_factory=list)


COMMANDS: dict[str, Command] = {}


def command(name: str, *arguments: Callable[[argparse.ArgumentParser], None], help: str = ""):
    """Registers a CLI verb together with the option groups it takes."""

    def decorator(func: Callable[[argparse.Namespace], ExperimentReport | None]):
        COMMANDS[name] = Command(name, func, help or (func.__doc__ or "").strip().splitlines()[0], list(arguments))
        return func

    return decorator


def int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}") from None
    if not values or any(value < 1 for value in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


# region: Option groups


def data_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--dataset", help="CSV file to read")
    source.add_argument("--synth", help="synthetic dataset, e.g. additive-sin:n=500,d=10")
    parser.add_argument("--target-col", help="target column name or 0-based index (default: last column)")
    parser.add_argument("--delimiter", default=",", help="CSV delimiter")


def model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True, help="model name, e.g. rbf-ard, gam, dpa-gp-ard")
    parser.add_argument("--J", type=int, help="number of 1-D projections, overrides the model's layout")
    parser.add_argument("--degrees", type=parse_degrees, help="projection degree schedule, e.g. 4x1,4x2,4x3")
    parser.add_argument("--m", type=int, help="inducing points per projection for interpolated models")
    parser.add_argument("--learn-alpha", action="store_true", help="learn the sub-kernel mixing weights")


def train_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-iterations", type=int, help="optimiser iteration cap")
    parser.add_argument("--learning-rate", type=float, help="Adam learning rate")


def cv_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--folds", type=int, help="folds per repeat")
    parser.add_argument("--repeats", type=int, help="cross validation repeats")


# endregion

# region: Shared helpers


def resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    configured = CONFIG.RUN.get("SEED")
    if configured is None:
        return 0
    try:
        return int(configured)
    except ValueError:
        raise UsageError(f"PROJGP_SEED must be an integer, got {configured!r}.") from None


def resolve_threads(args: argparse.Namespace) -> int:
    threads = getattr(args, "threads", None) or CONFIG.RUN.get("THREADS") or psutil.cpu_count(logical=True) or 1
    return max(1, int(threads))


def load_dataset(args: argparse.Namespace, seed: int) -> Dataset:
    if args.synth is not None:
        return parse_synth(args.synth, seed)
    target = args.target_col
    if target is not None and target.lstrip("-").isdigit():
        target = int(target)
    return load_csv(args.dataset, target, args.delimiter)


def model_config(args: argparse.Namespace, J: int | None = None) -> ModelConfig:
    return ModelConfig.from_name(
        args.model,
        J=J if J is not None else args.J,
        degrees=args.degrees,
        m=args.m,
        learn_mixing=args.learn_alpha,
    )


def train_config(args: argparse.Namespace) -> TrainConfig:
    base = TrainConfig.from_config()
    changes: dict[str, Any] = {}
    if getattr(args, "max_iterations", None) is not None:
        changes["max_iterations"] = args.max_iterations
    if getattr(args, "learning_rate", None) is not None:
        changes["learning_rate"] = args.learning_rate
    return replace(base, **changes)


def _config_echo(args: argparse.Namespace, **extra: Any) -> dict[str, Any]:
    skip = {"func", "command", "log_level"}
    return {key: value for key, value in vars(args).items() if key not in skip} | extra


# endregion


@command("cv", data_options, model_options, train_options, cv_options)
def cmd_cv(args: argparse.Namespace) -> ExperimentReport:
    """Repeated k-fold cross validation RMSE of one model."""
    seed = resolve_seed(args)
    dataset = load_dataset(args, seed)
    model = model_config(args)
    with stopwatch() as watch:
        result = cross_validate(
            dataset, model, args.folds, args.repeats, seed, train_config(args), resolve_threads(args)
        )
    log.info("%s on %s: RMSE %.4f +- %.4f.", model.name, dataset.name, result.mean, result.two_std)
    return ExperimentReport(
        "cv",
        _config_echo(args, model_config=model.to_dict(), dataset_info=dataset.describe()),
        seed,
        result.to_frame(),
        result.summary(),
        {"total_seconds": watch.elapsed},
    )


def _ablate_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--J-list", type=int_list, required=True, help="comma separated J values, e.g. 1,2,5,10,20")


@command("ablate-j", data_options, model_options, train_options, cv_options, _ablate_options)
def cmd_ablate_j(args: argparse.Namespace) -> ExperimentReport:
    """Cross validation RMSE as a function of the number of projections."""
    J_values, repeats = deduplicate(args.J_list)
    if repeats:
        log.warning("Ignoring repeated J values: %s.", ", ".join(map(str, repeats)))

    seed = resolve_seed(args)
    dataset = load_dataset(args, seed)
    threads = resolve_threads(args)
    rows = []
    with stopwatch() as watch:
        for J in J_values:
            model = model_config(args, J)
            result = cross_validate(dataset, model, args.folds, args.repeats, seed, train_config(args), threads)
            rows.append({"J": J, "rmse_mean": result.mean, "rmse_2std": result.two_std})
            log.info("J=%d: RMSE %.4f +- %.4f.", J, result.mean, result.two_std)

    frame = pd.DataFrame(rows)
    summary = {"J": J_values, "rmse_mean": frame["rmse_mean"].tolist()}
    if len(J_values) > 1:
        summary["spearman_rho"] = float(frame["J"].corr(frame["rmse_mean"], method="spearman"))
    return ExperimentReport("ablate-j", _config_echo(args), seed, frame, summary, {"total_seconds": watch.elapsed})


def _convergence_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", choices=("rbf", "cosine"), default="rbf", help="sub-kernel family")
    parser.add_argument("--J-list", type=int_list, default=[100, 1000, 10000, 100000], help="number of directions")
    parser.add_argument("--d", type=int, default=10, help="dimension the directions are sampled in")
    parser.add_argument("--repeats", type=int, default=1, help="independent estimates averaged per J")
    parser.add_argument("--bernstein-trials", type=int, default=0, help="also count bound violations over N trials")
    parser.add_argument("--delta", type=float, default=0.01, help="failure probability of the bound")


@command("kernel-convergence", _convergence_options)
def cmd_kernel_convergence(args: argparse.Namespace) -> ExperimentReport:
    """Monte Carlo convergence of random projection kernels to their expected kernel."""
    seed = resolve_seed(args)
    with stopwatch() as watch:
        report = convergence_report(args.family, args.J_list, DEFAULT_LAGS, args.d, seed, args.repeats)
        summary = report.summary()
        if args.bernstein_trials:
            violations = bernstein_violations(args.J_list, args.bernstein_trials, args.delta, DEFAULT_LAGS, args.d, seed)
            summary["bernstein"] = violations.to_dict(orient="records")
    log.info("Expected kernel deviation slope: %s.", summary["slope"])
    return ExperimentReport(
        "kernel-convergence", _config_echo(args), seed, report.to_frame(), summary, {"total_seconds": watch.elapsed}
    )


def _bench_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-list", type=int_list, default=[500, 1000, 2000, 4000], help="training set sizes")
    parser.add_argument("--d", type=int, default=100, help="input dimension")
    parser.add_argument("--iterations", type=int, default=120, help="optimiser iterations timed per run")
    parser.add_argument("--models", default="rbf-ard,dpa-gp-ard-ski", help="comma separated models to time")
    parser.add_argument("--J", type=int, help="projections for projected models")
    parser.add_argument("--m", type=int, help="inducing points per projection")


@command("bench-runtime", _bench_options)
def cmd_bench_runtime(args: argparse.Namespace) -> ExperimentReport:
    """Training time against n for interpolated and Cholesky inference."""
    seed = resolve_seed(args)
    fixed = replace(
        TrainConfig.from_config(), max_iterations=args.iterations, stop_window=args.iterations + 1
    )
    models = []
    for name in filter(None, (name.strip() for name in args.models.split(","))):
        projected = ModelConfig.from_name(name).method in ("gaussian", "diverse")
        models.append(ModelConfig.from_name(name, J=args.J if projected else None, m=args.m))

    rows = []
    for n in args.n_list:
        dataset = synth_additive_sin(n, args.d, 0.01, seed)
        normalizer = Normalizer.fit(dataset.X, dataset.y)
        X, y = normalizer.transform_X(dataset.X), normalizer.transform_y(dataset.y)
        for model in models:
            kernel = model.initial_kernel(args.d, seed)
            with stopwatch() as watch:
                _, trace = optimize_kernel(kernel, X, y, model.inference, fixed, seed, model.m)
            rows.append(
                {
                    "model": model.name,
                    "inference": model.inference,
                    "n": n,
                    "iterations": trace.iterations,
                    "seconds": watch.elapsed,
                }
            )
            log.info("%s, n=%d: %s for %s.", model.name, n, watch, f"{plural(trace.iterations):iteration}")

    frame = pd.DataFrame(rows)
    slopes = {
        name: loglog_slope(group["n"].tolist(), group["seconds"].tolist())
        for name, group in frame.groupby("model", sort=False)
    }
    settings = {model.name: model.to_dict() | {"m": model.m or CONFIG.SKI.INDUCING_POINTS} for model in models}
    return ExperimentReport("bench-runtime", _config_echo(args, settings=settings), seed, frame, {"slopes": slopes})


def _fit_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--save", required=True, help="where to write the fitted model")


@command("fit", data_options, model_options, train_options, _fit_options)
def cmd_fit(args: argparse.Namespace) -> ExperimentReport:
    """Trains a model on a dataset and saves it."""
    seed = resolve_seed(args)
    dataset = load_dataset(args, seed)
    model = model_config(args)
    with stopwatch() as watch:
        trained = fit_model(model, dataset.X, dataset.y, train_config(args), seed)
    trained.save(prepare_output(args.save))
    frame = pd.DataFrame([{"model": model.name, "n": dataset.n, "d": dataset.d, **trained.info}]).drop(
        columns=["theta", "theta_names"], errors="ignore"
    )
    summary = {"model_file": args.save, **trained.info}
    return ExperimentReport("fit", _config_echo(args), seed, frame, summary, {"total_seconds": watch.elapsed})


def _predict_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model-file", required=True, help="model saved by the fit command")
    parser.add_argument("--dataset", required=True, help="CSV file with the inputs")
    parser.add_argument("--target-col", help="column to drop from the inputs, if present")
    parser.add_argument("--delimiter", default=",", help="CSV delimiter")
    parser.add_argument("--variance", action="store_true", help="also write predictive variances")


@command("predict", _predict_options)
def cmd_predict(args: argparse.Namespace) -> ExperimentReport:
    """Predicts with a saved model."""
    trained = TrainedModel.load(args.model_file)
    if args.target_col is not None:
        target = int(args.target_col) if args.target_col.lstrip("-").isdigit() else args.target_col
        dataset = load_csv(args.dataset, target, args.delimiter)
    else:
        dataset = load_csv(args.dataset, delimiter=args.delimiter, require_target=False)

    with stopwatch() as watch:
        if args.variance:
            mean, variance = trained.predict(dataset.X, variance=True)  # type: ignore
            frame = pd.DataFrame({"prediction": mean, "variance": variance})
        else:
            frame = pd.DataFrame({"prediction": trained.predict(dataset.X)})
    if args.target_col is not None:
        frame["target"] = dataset.y
    seed = int(trained.info.get("seed") or 0)
    summary = {"model": trained.config.name, "n": dataset.n}
    return ExperimentReport("predict", _config_echo(args), seed, frame, summary, {"total_seconds": watch.elapsed})


def _gen_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--synth", required=True, help="synthetic dataset, e.g. xor:n=1000")


@command("gen-data", _gen_options)
def cmd_gen_data(args: argparse.Namespace) -> None:
    """Writes a synthetic dataset to CSV."""
    if args.out is None:
        raise UsageError("gen-data needs --out.")
    dataset = parse_synth(args.synth, resolve_seed(args))
    save_csv(dataset, prepare_output(args.out))
    log.info("Wrote %d rows of %s to %s.", dataset.n, dataset.name, args.out)

