from unittest import TestCase

import numpy as np
import numpy.testing as npt
import scipy.linalg

from projgp.errors import OutOfBounds, UnsupportedDegree
from projgp.gp import (
    Grid1D,
    additive_ski_operator,
    build_grid,
    build_ski_system,
    cubic_interp_weights,
    exact_objective,
    fit_exact,
    fit_ski,
    interpolation_matrix,
    predict,
    predict_ski,
    ski_log_marginal_likelihood,
    ski_objective,
    ski_operator,
)
from projgp.kernels import AdditiveKernel, KernelSpec
from projgp.linalg import ToeplitzColumn
from projgp.projections import ProjectionSet, sample_gaussian


def toy_problem(n: int = 50, d: int = 3, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (n, d))
    y = np.sin(X).sum(axis=1) + 0.05 * rng.standard_normal(n)
    return X, (y - y.mean()) / y.std()


def rpa_kernel(d: int = 3, J: int = 5, noise: float = 0.05, *, prescale: bool = False) -> AdditiveKernel:
    projections = sample_gaussian(J, 1, d, seed=1)
    size = d if prescale else J
    lengthscales = np.linspace(0.8, 1.5, size)
    return AdditiveKernel(projections, KernelSpec("rbf", lengthscales, 1.0, noise, prescale=prescale))


class TestGrid(TestCase):
    def test_unit_interval(self) -> None:
        grid = build_grid(np.array([0.0, 0.3, 1.0]), 5)
        npt.assert_allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
        self.assertAlmostEqual(grid.spacing, 0.25)

    def test_degenerate_range(self) -> None:
        with self.assertLogs("projgp.gp.interpolation", "WARNING"):
            grid = build_grid(np.full(4, 3.0), 8)
        self.assertEqual((grid.lower, grid.upper), (2.0, 4.0))

    def test_padding(self) -> None:
        grid = build_grid(np.array([-2.0, 0.0, 2.0]), 16, padding_fraction=0.1)
        self.assertAlmostEqual(grid.lower, -2.4)
        self.assertAlmostEqual(grid.upper, 2.4)

        padded = build_grid(np.array([0.0, 1.0]), 11, padding_cells=2)
        self.assertAlmostEqual(padded.spacing, 1.0 / 6.0)
        self.assertAlmostEqual(padded.lower + 2 * padded.spacing, 0.0)
        self.assertAlmostEqual(padded.upper - 2 * padded.spacing, 1.0)

    def test_invalid(self) -> None:
        with self.assertRaises(ValueError):
            build_grid(np.array([0.0, 1.0]), 3)
        with self.assertRaises(ValueError):
            Grid1D(1.0, 0.0, 10)


class TestInterpolationWeights(TestCase):
    grid = Grid1D(0.0, 9.0, 10)

    def test_node(self) -> None:
        columns, weights = cubic_interp_weights(self.grid, 4.0)
        npt.assert_array_equal(columns[0], [3, 4, 5, 6])
        npt.assert_allclose(weights[0], [0.0, 1.0, 0.0, 0.0], atol=1e-15)

    def test_midpoint(self) -> None:
        columns, weights = cubic_interp_weights(self.grid, 4.5)
        npt.assert_array_equal(columns[0], [3, 4, 5, 6])
        npt.assert_allclose(weights[0], [-1 / 16, 9 / 16, 9 / 16, -1 / 16], atol=1e-15)

    def test_rows(self) -> None:
        t = np.random.default_rng(0).uniform(0.0, 9.0, 100)
        columns, weights = cubic_interp_weights(self.grid, np.concatenate([t, [0.0, 0.2, 8.9, 9.0]]))
        self.assertEqual(weights.shape, (104, 4))
        npt.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-12)
        self.assertTrue(np.all(columns >= 0) and np.all(columns <= 9))
        npt.assert_array_equal(np.diff(columns, axis=1), 1)

    def test_reproduces_quadratics(self) -> None:
        f = lambda t: 0.3 * t**2 - 1.2 * t + 0.7
        nodes = self.grid.nodes
        t = np.random.default_rng(1).uniform(0.0, 9.0, 100)
        columns, weights, slopes = cubic_interp_weights(self.grid, t, derivative=True)
        npt.assert_allclose(np.sum(weights * f(nodes)[columns], axis=1), f(t), atol=1e-10)
        npt.assert_allclose(np.sum(slopes * f(nodes)[columns], axis=1), 0.6 * t - 1.2, atol=1e-10)

    def test_out_of_bounds(self) -> None:
        with self.assertRaises(OutOfBounds):
            cubic_interp_weights(self.grid, 9.5)

    def test_sparse_matrix(self) -> None:
        t = np.array([0.5, 4.0, 8.25])
        W = interpolation_matrix(self.grid, t).matrix
        self.assertEqual(W.shape, (3, 10))
        npt.assert_allclose(W @ self.grid.nodes, t, atol=1e-12)


class TestSkiOperators(TestCase):
    def test_nodes_give_exact_gram(self) -> None:
        grid = Grid1D(0.0, 9.0, 10)
        z = np.array([0.0, 2.0, 3.0, 7.0, 9.0])
        column = ToeplitzColumn(np.exp(-0.5 * (np.arange(10) * grid.spacing) ** 2))
        A = ski_operator(interpolation_matrix(grid, z), column)
        npt.assert_allclose(A.to_dense(), np.exp(-0.5 * (z[:, None] - z[None, :]) ** 2), atol=1e-10)
        npt.assert_array_equal(A(np.zeros(5)), np.zeros(5))

    def test_dense_reconstruction(self) -> None:
        rng = np.random.default_rng(2)
        for n, m in ((10, 8), (30, 40), (64, 64)):
            z = rng.uniform(-1, 1, n)
            grid = build_grid(z, m, 0.1, 1)
            interpolation = interpolation_matrix(grid, z)
            column = ToeplitzColumn(np.exp(-0.5 * (np.arange(m) * grid.spacing / 0.7) ** 2))
            W = interpolation.matrix.toarray()
            expected = W @ scipy.linalg.toeplitz(column.column) @ W.T

            A = ski_operator(interpolation, column)
            npt.assert_allclose(A.to_dense(), expected, atol=1e-8)
            npt.assert_allclose(A.diagonal(), np.diag(expected), atol=1e-10)

    def test_additive_matches_gam(self) -> None:
        rng = np.random.default_rng(3)
        d = 3
        X = rng.integers(0, 10, (20, d)).astype(float)
        kernel = AdditiveKernel(ProjectionSet.axis(d), KernelSpec("rbf", np.array([0.8, 1.0, 2.0]), 1.3, 0.1))
        system = build_ski_system(kernel, X, grids=(Grid1D(0.0, 9.0, 10),) * d)
        npt.assert_allclose(system.operator.to_dense(), kernel.matrix(X, noise=True), atol=1e-8)

    def test_additive_structure(self) -> None:
        rng = np.random.default_rng(4)
        z = rng.uniform(0, 1, 12)
        grid = build_grid(z, 16, 0.1, 1)
        term = ski_operator(interpolation_matrix(grid, z), ToeplitzColumn(np.exp(-np.arange(16) * 0.1)))
        v = rng.standard_normal(12)

        single = additive_ski_operator([term], np.ones(1), 0.2)
        npt.assert_allclose(single(v), term(v) + 0.2 * v)

        pair = additive_ski_operator([term, term], np.array([0.5, 1.0]), 0.2)
        doubled = additive_ski_operator([term, term], np.array([1.0, 2.0]), 0.2)
        npt.assert_allclose(doubled(v) - 0.2 * v, 2 * (pair(v) - 0.2 * v), atol=1e-12)

        u = rng.standard_normal(12)
        self.assertAlmostEqual(u @ pair(v), v @ pair(u), delta=1e-10)
        self.assertGreaterEqual(v @ pair(v), 0.0)

    def test_unsupported_degree(self) -> None:
        kernel = AdditiveKernel(sample_gaussian(2, 2, 3, seed=0), KernelSpec("rbf", np.ones(4)))
        with self.assertRaises(UnsupportedDegree):
            build_ski_system(kernel, np.zeros((4, 3)), m=16)


class TestSkiInference(TestCase):
    def test_matches_exact(self) -> None:
        X, y = toy_problem()
        for kernel in (rpa_kernel(), rpa_kernel(prescale=True)):
            fit = fit_ski(X, y, kernel, m=512)
            exact_mean, exact_var = predict(fit_exact(X, y, kernel), X, diagonal=True)
            self.assertLessEqual(np.max(np.abs(predict_ski(fit, X) - exact_mean)), 0.05)

            _, variance = predict_ski(fit, X[:10], variance=True)
            npt.assert_allclose(variance, exact_var[:10], atol=0.05)

    def test_deterministic(self) -> None:
        X, y = toy_problem(30)
        fit = fit_ski(X, y, rpa_kernel(), m=128)
        X_star = np.random.default_rng(5).uniform(-1, 1, (7, 3))
        npt.assert_array_equal(predict_ski(fit, X_star), predict_ski(fit, X_star))

    def test_prior_reversion(self) -> None:
        X, y = toy_problem(30)
        kernel = AdditiveKernel(ProjectionSet.axis(3), KernelSpec("rbf", np.ones(3), 1.0, 0.05))
        fit = fit_ski(X, y, kernel, m=256)
        with self.assertLogs("projgp.gp.ski", "WARNING"):
            mean = predict_ski(fit, np.full((1, 3), 40.0))
        self.assertAlmostEqual(float(mean[0]), 0.0, delta=1e-6)

    def test_ridge_dominated(self) -> None:
        X, y = toy_problem(30)
        fit = fit_ski(X, y, rpa_kernel(noise=1e6), m=128)
        npt.assert_allclose(fit.alpha, y / 1e6, rtol=1e-3, atol=1e-9)
        self.assertLess(np.max(np.abs(predict_ski(fit, X))), 1e-3)

    def test_restored_fit(self) -> None:
        X, y = toy_problem(30)
        kernel = rpa_kernel()
        fit = fit_ski(X, y, kernel, m=128)
        restored = fit_ski(X, y, kernel, grids=fit.grids, alpha=fit.alpha)
        npt.assert_allclose(restored.grid_vectors, fit.grid_vectors)
        npt.assert_allclose(predict_ski(restored, X), predict_ski(fit, X))


class TestSkiObjective(TestCase):
    def test_bilinear_gradients_match_exact(self) -> None:
        X, _ = toy_problem(40)
        rng = np.random.default_rng(6)
        U, V = rng.standard_normal((40, 3)), rng.standard_normal((40, 3))
        for kernel in (rpa_kernel(), rpa_kernel(prescale=True)):
            expected = np.einsum("ak,lab,bk->l", U, kernel.gradients(X), V) / 3
            actual = build_ski_system(kernel, X, m=512).bilinear_gradients(U, V)
            npt.assert_allclose(actual, expected, rtol=1e-3, atol=1e-3 * np.abs(expected).max())

    def test_objective(self) -> None:
        X, y = toy_problem()
        kernel = rpa_kernel()
        lml, gradient, fit = ski_objective(kernel, X, y, m=512, num_probes=30, seed=0)
        exact_lml, exact_gradient, _ = exact_objective(kernel, X, y)

        self.assertEqual(gradient.shape, exact_gradient.shape)
        self.assertLessEqual(abs(lml - exact_lml), 10.0)
        self.assertEqual(ski_objective(kernel, X, y, m=512, num_probes=30, seed=0)[0], lml)
        self.assertLessEqual(abs(ski_log_marginal_likelihood(fit, seed=1) - exact_lml), 10.0)
