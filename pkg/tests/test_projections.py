from unittest import TestCase

import numpy as np
import numpy.testing as npt

from projgp.errors import DegenerateDirection, EmptyProjectionSet, InvalidDegrees
from projgp.projections import (
    DescentConfig,
    ProjectionSet,
    diverse_directions,
    diversity_loss,
    sample_gaussian,
    separation_distance,
)


def plane_directions(*degrees: float) -> np.ndarray:
    angles = np.radians(degrees)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


class TestGaussianProjections(TestCase):
    def test_deterministic(self) -> None:
        first, second = sample_gaussian(5, 2, 6, seed=3), sample_gaussian(5, 2, 6, seed=3)
        for P, Q in zip(first, second):
            self.assertEqual(P.tobytes(), Q.tobytes())
        self.assertEqual(first.method, "gaussian")

    def test_shapes(self) -> None:
        P = sample_gaussian(20, 1, 8, seed=0)
        self.assertEqual(P.J, 20)
        self.assertEqual(P.directions().shape, (20, 8))

        mixed = sample_gaussian(12, [1] * 4 + [2] * 4 + [3] * 4, 5, seed=0)
        self.assertEqual([M.shape for M in mixed], [(1, 5)] * 4 + [(2, 5)] * 4 + [(3, 5)] * 4)
        with self.assertRaises(InvalidDegrees):
            mixed.directions()

    def test_entry_variance(self) -> None:
        for degree in (1, 2):
            P = sample_gaussian(20, degree, 500, seed=degree)
            entries = np.concatenate([M.ravel() for M in P])
            self.assertAlmostEqual(float(np.var(entries)), 1.0 / degree, delta=0.2 / degree)

    def test_invalid_degrees(self) -> None:
        with self.assertRaises(InvalidDegrees):
            sample_gaussian(2, 4, 3)
        with self.assertRaises(InvalidDegrees):
            sample_gaussian(2, 0, 3)
        with self.assertRaises(InvalidDegrees):
            sample_gaussian(2, [1, 1, 1], 3)

    def test_empty_set(self) -> None:
        with self.assertRaises(EmptyProjectionSet):
            ProjectionSet((), "gaussian")

    def test_json(self) -> None:
        P = sample_gaussian(3, [1, 2, 1], 4, seed=9)
        restored = ProjectionSet.from_json(P.to_json())
        self.assertEqual(restored.seed, 9)
        self.assertEqual(restored.degrees, (1, 2, 1))
        for a, b in zip(P, restored):
            npt.assert_array_equal(a, b)

    def test_layouts(self) -> None:
        npt.assert_array_equal(ProjectionSet.axis(3).directions(), np.eye(3))
        self.assertEqual(ProjectionSet.identity(4).degrees, (4,))


class TestSeparation(TestCase):
    def test_examples(self) -> None:
        self.assertAlmostEqual(separation_distance(np.eye(2)), np.pi / 2, places=12)
        self.assertAlmostEqual(separation_distance(plane_directions(30, 210)), 0.0, places=6)
        self.assertAlmostEqual(separation_distance(plane_directions(0, 60, 120)), np.pi / 3, places=12)

    def test_sign_invariance(self) -> None:
        directions = plane_directions(10, 75, 140)
        flipped = directions * np.array([[1.0], [-1.0], [1.0]])
        self.assertAlmostEqual(separation_distance(directions), separation_distance(flipped), places=12)

    def test_degenerate(self) -> None:
        with self.assertRaises(DegenerateDirection):
            separation_distance(np.array([[1.0, 0.0], [0.0, 1.1]]))
        with self.assertRaises(DegenerateDirection):
            separation_distance(np.array([[1.0, 0.0]]))


class TestDiversity(TestCase):
    def test_loss_examples(self) -> None:
        self.assertEqual(diversity_loss(np.eye(3))[0], 0.0)
        self.assertAlmostEqual(diversity_loss(plane_directions(0, 45))[0], 0.5, places=12)

    def test_gradient(self) -> None:
        rng = np.random.default_rng(0)
        directions = rng.standard_normal((5, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        _, gradient = diversity_loss(directions)

        h = 1e-6
        numeric = np.zeros_like(directions)
        for index in np.ndindex(*directions.shape):
            step = np.zeros_like(directions)
            step[index] = h
            numeric[index] = (diversity_loss(directions + step)[0] - diversity_loss(directions - step)[0]) / (2 * h)
        npt.assert_allclose(gradient, numeric, atol=1e-5)

    def test_gram_schmidt_branch(self) -> None:
        P = diverse_directions(3, 5, seed=1)
        directions = P.directions()
        npt.assert_allclose(directions @ directions.T, np.eye(3), atol=1e-10)
        self.assertAlmostEqual(separation_distance(directions), np.pi / 2, places=10)
        self.assertEqual(P.method, "diverse")

        square = diverse_directions(4, 4, seed=2)
        self.assertLessEqual(diversity_loss(square.directions())[0], 1e-12)

    def test_descent_branch(self) -> None:
        cfg = DescentConfig()
        improved = 0
        for seed in range(50):
            initial = np.random.default_rng(seed).normal(size=(3, 2))
            initial /= np.linalg.norm(initial, axis=1, keepdims=True)

            P = diverse_directions(3, 2, seed=seed, gd_config=cfg)
            directions = P.directions()
            npt.assert_allclose(np.linalg.norm(directions, axis=1), 1.0, atol=1e-8)
            self.assertLessEqual(P.trace[-1], diversity_loss(initial)[0])
            self.assertTrue(np.all(np.diff(P.trace) <= 0))
            improved += separation_distance(directions) >= separation_distance(initial)

        self.assertGreaterEqual(improved, 45)

    def test_deterministic(self) -> None:
        first, second = diverse_directions(7, 3, seed=5), diverse_directions(7, 3, seed=5)
        self.assertEqual(first.directions().tobytes(), second.directions().tobytes())
