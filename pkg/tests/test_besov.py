from __future__ import annotations

import math
import unittest

import numpy as np
from numpy.testing import assert_allclose

from needlet_regression import besov
from needlet_regression.estimator import Estimate, empirical_coefficients
from needlet_regression.frame import CoefficientKind, CoefficientSet, analyze, build_frame, zero_coefficients
from needlet_regression.sim import generate_dataset, replicate_seed
from needlet_regression.window import build_window


class TestFunctionsTestCase(unittest.TestCase):
    def test_values(self) -> None:
        self.assertAlmostEqual(besov.test_function("F1", 1.3), 1.0 / (4.0 * math.pi))
        self.assertAlmostEqual(besov.test_function("F1", 0.0), 0.0795775, places=7)
        self.assertEqual(besov.test_function("F2", 0.0), 1.0)
        expected = (math.exp(-((2.0 - 1.5 * math.pi) ** 2)) + 2.0) * math.sin(-4.0)
        self.assertAlmostEqual(besov.test_function(besov.TestFunction.F3, 2.0), expected, places=12)

    def test_vectorized(self) -> None:
        x = np.linspace(0.0, 6.0, 7)
        assert_allclose(besov.test_function("F2", x), np.cos(4.0 * x))
        self.assertEqual(besov.test_function("F1", x).shape, (7,))

    def test_sup_norm(self) -> None:
        self.assertEqual(besov.sup_norm("F2"), 1.0)
        self.assertAlmostEqual(besov.sup_norm("F1"), 1.0 / (4.0 * math.pi))
        self.assertGreater(besov.sup_norm("F3"), 1.0)

    def test_unknown_function(self) -> None:
        with self.assertRaises(ValueError):
            besov.test_function("F4", 0.0)


class SequenceNormTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.frame = build_frame(1, 2.0, 5, build_window(2.0))

    def test_zero_coefficients(self) -> None:
        params = besov.BesovParams(s=1.0, p=2.0, q=2.0)
        self.assertEqual(besov.besov_sequence_norm(zero_coefficients(self.frame, 5), params), 0.0)

    def test_single_coefficient(self) -> None:
        coeffs = zero_coefficients(self.frame, 3)
        coeffs.level(2)[1] = 1.0
        params = besov.BesovParams(s=1.0, p=2.0, q=2.0, B=2.0, d=1)
        self.assertAlmostEqual(besov.besov_sequence_norm(coeffs, params), 4.0)
        sup = besov.BesovParams(s=1.0, p=math.inf, q=math.inf)
        self.assertAlmostEqual(besov.besov_sequence_norm(coeffs, sup), 2.0 ** (2 * 1.5))

    def test_single_mode_is_one_level(self) -> None:
        coeffs = analyze(self.frame, lambda x: np.cos(4.0 * x))
        for j in (0, 1, 3, 4, 5):
            self.assertLess(float(np.max(np.abs(coeffs.level(j)))), 1e-10)
        norm = besov.besov_sequence_norm(coeffs, besov.BesovParams(s=5.0, p=2.0, q=1.0))
        self.assertTrue(math.isfinite(norm))
        expected = 2.0**10 * math.sqrt(math.pi)
        self.assertLessEqual(abs(norm - expected) / expected, 1e-6)

    def test_theta_true(self) -> None:
        coeffs = CoefficientSet(values=(np.array([0.3, -0.4]),), kind=CoefficientKind.EXACT, mean_term=0.0)
        self.assertAlmostEqual(besov.theta_true(coeffs, 0, 2), 0.25)
        self.assertAlmostEqual(besov.theta_true(zero_coefficients(self.frame, 2), 1, 2), 0.0)
        exact = analyze(self.frame, lambda x: np.cos(4.0 * x))
        self.assertLessEqual(abs(besov.theta_true(exact, 2, 2) - math.pi) / math.pi, 1e-6)

    def test_invalid_params(self) -> None:
        with self.assertRaises(ValueError):
            besov.BesovParams(s=0.0, p=2.0, q=2.0)
        with self.assertRaises(ValueError):
            besov.BesovParams(s=1.0, p=0.5, q=2.0)


class RiskTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.frame = build_frame(1, 2.0, 6, build_window(2.0))

    def test_exact_estimate_has_zero_risk(self) -> None:
        truth = besov.truth_function("F2")
        estimate = Estimate(frame=self.frame, raw=analyze(self.frame, truth))
        self.assertLess(besov.lp_risk(estimate, truth, 2), 1e-12)
        self.assertLess(besov.lp_risk(estimate, truth, math.inf), 1e-6)

    def test_constant_estimate(self) -> None:
        c = 0.7
        coeffs = zero_coefficients(self.frame, 6)
        constant = CoefficientSet(values=coeffs.values, kind=coeffs.kind, mean_term=c * math.sqrt(2.0 * math.pi))
        estimate = Estimate(frame=self.frame, raw=constant)
        zero = lambda x: np.zeros(np.shape(x)[0])
        self.assertAlmostEqual(besov.lp_risk(estimate, zero, 2), 2.0 * math.pi * c**2, places=10)
        self.assertAlmostEqual(besov.lp_risk(estimate, zero, 1), 2.0 * math.pi * c, places=10)
        self.assertAlmostEqual(besov.lp_risk(estimate, zero, math.inf), c, places=12)

    def test_sphere_constant_estimate(self) -> None:
        frame = build_frame(2, 2.0, 1, build_window(2.0))
        coeffs = zero_coefficients(frame, 1)
        constant = CoefficientSet(values=coeffs.values, kind=coeffs.kind, mean_term=0.5 * math.sqrt(4.0 * math.pi))
        zero = lambda x: np.zeros(np.shape(x)[0])
        risk = besov.lp_risk(Estimate(frame=frame, raw=constant), zero, 2, grid_size=400)
        self.assertAlmostEqual(risk, 4.0 * math.pi * 0.25, places=10)

    def test_grid_size_floor(self) -> None:
        estimate = Estimate(frame=self.frame, raw=zero_coefficients(self.frame, 2))
        with self.assertRaises(ValueError):
            besov.lp_risk(estimate, besov.truth_function("F1"), 2, grid_size=100)

    def test_parseval_route_agrees(self) -> None:
        truth = lambda x: np.cos(4.0 * x)
        fitted = lambda x: np.cos(4.0 * x) + 0.5 * np.sin(7.0 * x) - 0.2
        estimate = Estimate(frame=self.frame, raw=analyze(self.frame, fitted))
        exact = analyze(self.frame, truth)
        expected = 0.25 * math.pi + 0.04 * 2.0 * math.pi
        self.assertAlmostEqual(besov.coefficient_risk(estimate, exact), expected, places=6)
        self.assertAlmostEqual(besov.lp_risk(estimate, truth, 2), expected, places=6)


class EmbeddingTestCase(unittest.TestCase):
    def test_embeddings_hold_on_random_vectors(self) -> None:
        rng = np.random.default_rng(17)
        for p, r in ((1.0, 2.0), (2.0, 4.0)):
            for _ in range(1000):
                values = rng.standard_normal(int(rng.integers(1, 65))) * rng.uniform(0.01, 10.0)
                upper, lower = besov.embedding_gaps(values, p, r)
                scale = float(np.sum(np.abs(values)))
                self.assertGreaterEqual(upper, -1e-12 * scale)
                self.assertGreaterEqual(lower, -1e-12 * scale)

    def test_single_entry_is_tight(self) -> None:
        upper, lower = besov.embedding_gaps(np.array([0.0, 3.0, 0.0]), 1.0, 2.0)
        self.assertAlmostEqual(lower, 0.0)
        self.assertGreater(upper, 0.0)

    def test_rejects_bad_orders(self) -> None:
        with self.assertRaises(ValueError):
            besov.embedding_gaps(np.ones(3), 2.0, 1.0)


class MomentBoundTestCase(unittest.TestCase):
    def test_scaled_moments_stay_bounded(self) -> None:
        frame = build_frame(1, 2.0, 2, build_window(2.0))
        truth = besov.truth_function("F2")
        exact = analyze(frame, truth).level(2)[0]
        R = 500
        sizes = [2**e for e in range(6, 11)]
        samples = np.empty((len(sizes), R))
        for index, n in enumerate(sizes):
            for r in range(R):
                data = generate_dataset(truth, n, 0.5, seed=replicate_seed(99, index, r))
                samples[index, r] = empirical_coefficients(frame, data, 2).coefficients.level(2)[0]
        for p in (2, 4):
            scaled = [n ** (p / 2.0) * float(besov.coefficient_moment(row, exact, p)) for n, row in zip(sizes, samples)]
            self.assertLess(max(scaled) / min(scaled), 5.0, msg=f"p={p}: {scaled}")


if __name__ == "__main__":
    unittest.main()
