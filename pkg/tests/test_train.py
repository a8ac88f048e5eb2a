from unittest import TestCase, mock

import numpy as np
import numpy.testing as npt
from sklearn.model_selection import KFold

from projgp.data import Dataset, synth_additive_sin
from projgp.errors import NonFiniteGradient, NotPositiveDefinite, TooFewPoints
from projgp.gp import exact_objective
from projgp.models import ModelConfig
from projgp.train import (
    AdamState,
    NoisePrior,
    TrainConfig,
    TrainTrace,
    adam_step,
    cross_validate,
    fit_model,
    optimize,
    optimize_kernel,
    smoothed_box_log_prior,
)

SHORT = TrainConfig(max_iterations=40)


class TestAdam(TestCase):
    def test_zero_gradient(self) -> None:
        theta = np.array([0.5, -1.0])
        updated, state = adam_step(theta, np.zeros(2), AdamState.zeros(2), 0.1)
        npt.assert_array_equal(updated, theta)
        self.assertEqual(state.t, 1)

    def test_constant_gradient(self) -> None:
        theta, state = np.zeros(2), AdamState.zeros(2)
        for _ in range(50):
            previous = theta
            theta, state = adam_step(theta, np.array([3.0, -0.2]), state, 0.1)
        npt.assert_allclose(theta - previous, [-0.1, 0.1], rtol=1e-6)

    def test_deterministic(self) -> None:
        rng = np.random.default_rng(0)
        gradients = rng.standard_normal((10, 3))
        runs = []
        for _ in range(2):
            theta, state = np.ones(3), AdamState.zeros(3)
            for g in gradients:
                theta, state = adam_step(theta, g, state, 0.1)
            runs.append(theta)
        npt.assert_array_equal(*runs)

    def test_non_finite(self) -> None:
        with self.assertRaises(NonFiniteGradient):
            adam_step(np.zeros(2), np.array([np.nan, 0.0]), AdamState.zeros(2), 0.1)


class TestNoisePrior(TestCase):
    prior = NoisePrior()

    def test_flat_inside(self) -> None:
        for noise in (1e-4, 1e-2, 1.0):
            self.assertEqual(smoothed_box_log_prior(noise, self.prior), (0.0, 0.0))

    def test_symmetric_outside(self) -> None:
        below, slope_below = smoothed_box_log_prior(1e-4 / np.e, self.prior)
        above, slope_above = smoothed_box_log_prior(np.e, self.prior)
        self.assertAlmostEqual(below, -50.0)
        self.assertAlmostEqual(above, below)
        self.assertAlmostEqual(slope_below, 100.0)
        self.assertAlmostEqual(slope_above, -100.0)

    def test_validation(self) -> None:
        with self.assertRaises(ValueError):
            NoisePrior(1.0, 0.1)
        with self.assertRaises(ValueError):
            TrainConfig(learning_rate=0.0)
        with self.assertRaises(ValueError):
            TrainConfig(stop_window=0)


class TestOptimize(TestCase):
    data = synth_additive_sin(40, 2, noise_std=0.1, seed=0)

    def normalised(self) -> tuple[np.ndarray, np.ndarray]:
        X, y = self.data.X, self.data.y
        return (X - X.mean(0)) / X.std(0), (y - y.mean()) / y.std()

    def test_improves_likelihood(self) -> None:
        X, y = self.normalised()
        kernel = ModelConfig.from_name("gam").initial_kernel(2)
        best, trace = optimize_kernel(kernel, X, y, train_cfg=SHORT, seed=0)
        self.assertGreater(exact_objective(best, X, y)[0], exact_objective(kernel, X, y)[0])
        self.assertEqual(trace.best_smoothed, max(trace.smoothed))
        npt.assert_allclose(best.theta, trace.best_theta, atol=1e-12)
        self.assertIn(trace.stop_reason, ("converged", "max_iterations"))
        self.assertLessEqual(trace.iterations, SHORT.max_iterations)

    def test_deterministic(self) -> None:
        X, y = self.normalised()
        model = ModelConfig.from_name("rpa-gp-1", J=3)
        first = optimize(X, y, model, SHORT, seed=4)
        second = optimize(X, y, model, SHORT, seed=4)
        npt.assert_array_equal(first[0], second[0])
        self.assertEqual(first[1].lml, second[1].lml)
        npt.assert_array_equal(first[0], first[2].theta)

    def test_stops_on_plateau(self) -> None:
        X, y = self.normalised()
        cfg = TrainConfig(learning_rate=1e-9, max_iterations=100, stop_window=5)
        _, trace, _ = optimize(X, y, ModelConfig.from_name("gam"), cfg, seed=0)
        self.assertEqual(trace.stop_reason, "converged")
        self.assertEqual(trace.iterations, 6)
        self.assertLess(trace.iterations, cfg.max_iterations)

    def test_recovers_lengthscale(self) -> None:
        rng = np.random.default_rng(3)
        X = rng.uniform(-3.0, 3.0, (100, 1))
        model = ModelConfig.from_name("gam")
        truth = model.initial_kernel(1).with_theta(np.log([0.5, 1.0, 0.01]))
        y = np.linalg.cholesky(truth.matrix(X, noise=True)) @ rng.standard_normal(100)
        _, trace, kernel = optimize(X, y, model, TrainConfig(max_iterations=500), seed=0)
        self.assertLessEqual(trace.iterations, 500)
        self.assertGreaterEqual(kernel.spec.lengthscales[0], 0.25)
        self.assertLessEqual(kernel.spec.lengthscales[0], 1.0)

    def test_pure_noise_is_explained_by_total_variance(self) -> None:
        rng = np.random.default_rng(5)
        X = rng.uniform(-3.0, 3.0, (100, 1))
        y = rng.standard_normal(100)
        y = (y - y.mean()) / y.std()
        _, _, kernel = optimize(X, y, ModelConfig.from_name("gam"), TrainConfig(max_iterations=500), seed=0)
        # short lengthscales let the signal term mimic white noise, only the sum is identified
        total = kernel.output_scale + kernel.noise_variance
        self.assertGreater(total, 0.6)
        self.assertLess(total, 1.4)
        self.assertLess(kernel.noise_variance, 1.05)

    def test_failure_keeps_trace(self) -> None:
        X, y = self.normalised()
        calls = []

        def failing(kernel, X, y):
            calls.append(kernel.theta)
            if len(calls) == 3:
                raise NotPositiveDefinite(pivot=2)
            return exact_objective(kernel, X, y)

        with mock.patch("projgp.train.optimizer.exact_objective", failing):
            with self.assertRaises(NotPositiveDefinite) as ctx:
                optimize(X, y, ModelConfig.from_name("gam"), SHORT, seed=0)

        trace = ctx.exception.trace
        self.assertIsInstance(trace, TrainTrace)
        self.assertEqual(trace.iterations, 2)
        self.assertEqual(trace.stop_reason, "failed")
        npt.assert_allclose(trace.failed_theta, calls[-1], atol=1e-12)
        npt.assert_allclose(ctx.exception.context["theta"], calls[-1], atol=1e-12)

    def test_trace_frame(self) -> None:
        trace = TrainTrace()
        for value in (1.0, 2.0, 3.0):
            trace.append(value, value, 0.5, smoothing=2)
        self.assertEqual(trace.smoothed, [1.0, 1.5, 2.5])
        frame = trace.to_frame()
        self.assertEqual(list(frame.columns), ["iteration", "lml", "objective", "smoothed", "grad_norm"])
        self.assertEqual(len(frame), 3)

    def test_trace_smoothing_window(self) -> None:
        trace = TrainTrace()
        for value in (1.0, 2.0, 3.0, 4.0, 8.0):
            trace.append(value, value, 0.0, smoothing=3)
        npt.assert_allclose(trace.smoothed, [1.0, 1.5, 2.0, 3.0, 5.0])
        self.assertEqual(trace.best_smoothed, 1.0)

    def test_structured_interpolation_model(self) -> None:
        model = ModelConfig.from_name("rpa-gp-ski", J=3, m=64)
        trained = fit_model(model, self.data.X, self.data.y, TrainConfig(max_iterations=5), seed=1)
        self.assertEqual(trained.predict(self.data.X[:5]).shape, (5,))
        self.assertTrue(np.isfinite(trained.info["train_nll"]))


class TestCrossValidation(TestCase):
    def test_mean_model(self) -> None:
        data = synth_additive_sin(500, 3, seed=1)
        result = cross_validate(data, ModelConfig.from_name("mean"), folds=10, repeats=2, seed=0)
        self.assertEqual(len(result.folds), 20)
        self.assertAlmostEqual(result.mean, 1.0, delta=0.1)
        self.assertAlmostEqual(result.two_std, 2 * float(np.std(result.rmse)))

    def test_folds_partition_data(self) -> None:
        data = synth_additive_sin(53, 2, seed=2)
        result = cross_validate(data, ModelConfig.from_name("mean"), folds=5, repeats=2, seed=3)
        frame = result.to_frame()
        self.assertEqual(list(frame[["repeat", "fold"]].itertuples(index=False, name=None)), [(r, f) for r in range(2) for f in range(5)])
        for _, group in frame.groupby("repeat"):
            self.assertEqual(group["n_test"].sum(), 53)
            self.assertTrue(np.all(group["n_train"] + group["n_test"] == 53))

    def test_no_test_fold_leakage(self) -> None:
        data = synth_additive_sin(30, 2, seed=4)
        _, test = next(KFold(5, shuffle=True, random_state=7).split(data.X))
        y = data.y.copy()
        y[test] += 100.0
        corrupted = Dataset(data.name, data.X, y)

        mean = ModelConfig.from_name("mean")
        clean = cross_validate(data, mean, folds=5, repeats=1, seed=7)
        dirty = cross_validate(corrupted, mean, folds=5, repeats=1, seed=7)
        self.assertEqual(clean.folds[0].target_mean, dirty.folds[0].target_mean)
        self.assertEqual(clean.folds[0].target_std, dirty.folds[0].target_std)
        self.assertNotEqual(clean.folds[1].target_mean, dirty.folds[1].target_mean)
        self.assertGreater(dirty.folds[0].rmse, clean.folds[0].rmse)

    def test_threads_do_not_change_results(self) -> None:
        data = synth_additive_sin(40, 2, noise_std=0.1, seed=3)
        model = ModelConfig.from_name("gam")
        cfg = TrainConfig(max_iterations=10)
        serial = cross_validate(data, model, folds=2, repeats=1, seed=5, train_cfg=cfg, threads=1)
        parallel = cross_validate(data, model, folds=2, repeats=1, seed=5, train_cfg=cfg, threads=2)
        npt.assert_array_equal(serial.rmse, parallel.rmse)
        self.assertEqual(serial.summary()["model"], "gam")

    def test_too_few_points(self) -> None:
        data = Dataset("tiny", np.arange(6.0).reshape(3, 2), np.arange(3.0))
        with self.assertRaises(TooFewPoints):
            cross_validate(data, ModelConfig.from_name("mean"), folds=10)
