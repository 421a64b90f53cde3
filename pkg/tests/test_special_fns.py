from __future__ import annotations

import math
import unittest

import numpy as np
from numpy.testing import assert_allclose
from scipy.special import eval_gegenbauer

from needlet_regression.frame import circle_cubature, sphere_cubature
from needlet_regression.special_fns import (
    KernelSpec,
    clamp_cosine,
    gegenbauer_eval,
    gegenbauer_table,
    harmonic_dimension,
    kernel_sum,
    projector_kernel,
)


class KernelSpecTestCase(unittest.TestCase):
    def test_sphere_areas(self) -> None:
        self.assertAlmostEqual(KernelSpec.for_dimension(1).omega_d, 2.0 * math.pi)
        self.assertAlmostEqual(KernelSpec.for_dimension(2).omega_d, 4.0 * math.pi)
        self.assertAlmostEqual(KernelSpec.for_dimension(3).omega_d, 2.0 * math.pi**2)
        self.assertEqual(KernelSpec.for_dimension(2).eta, 0.5)

    def test_rejects_dimension_zero(self) -> None:
        with self.assertRaises(ValueError):
            KernelSpec.for_dimension(0)


class GegenbauerTestCase(unittest.TestCase):
    def test_legendre_degree_two(self) -> None:
        self.assertAlmostEqual(gegenbauer_eval(0.5, 2, 0.3), (3 * 0.09 - 1) / 2, places=14)

    def test_matches_scipy(self) -> None:
        t = np.linspace(-1.0, 1.0, 41)
        for eta in (0.5, 1.0, 1.5):
            for ell in range(0, 12):
                assert_allclose(gegenbauer_eval(eta, ell, t), eval_gegenbauer(ell, eta, t), rtol=1e-10, atol=1e-10)

    def test_table_matches_single_degrees(self) -> None:
        t = np.linspace(-1.0, 1.0, 17)
        table = gegenbauer_table(1.0, 9, t)
        for ell in range(10):
            assert_allclose(table[ell], gegenbauer_eval(1.0, ell, t), rtol=1e-12, atol=1e-12)

    def test_rejects_bad_arguments(self) -> None:
        with self.assertRaises(ValueError):
            gegenbauer_eval(0.0, 2, 0.1)
        with self.assertRaises(ValueError):
            gegenbauer_eval(0.5, -1, 0.1)
        with self.assertRaises(ValueError):
            clamp_cosine(1.1)

    def test_clamp_absorbs_rounding(self) -> None:
        self.assertEqual(clamp_cosine(1.0 + 1e-14), 1.0)

    def test_legendre_bounded_by_one(self) -> None:
        t = np.linspace(-1.0, 1.0, 2001)
        table = gegenbauer_table(0.5, 200, t)
        self.assertLessEqual(float(np.max(np.abs(table))), 1.0 + 1e-10)
        assert_allclose(table[:, -1], 1.0, atol=1e-10)
        assert_allclose(np.abs(table[:, 0]), 1.0, atol=1e-10)
        self.assertAlmostEqual(gegenbauer_eval(0.5, 5, 1.0), 1.0, places=12)


class ProjectorTestCase(unittest.TestCase):
    def test_harmonic_dimensions(self) -> None:
        circle = KernelSpec.for_dimension(1)
        sphere = KernelSpec.for_dimension(2)
        self.assertEqual(harmonic_dimension(circle, 0), 1)
        self.assertEqual(harmonic_dimension(circle, 5), 2)
        self.assertEqual([harmonic_dimension(sphere, ell) for ell in range(4)], [1, 3, 5, 7])

    def test_trace_equals_dimension(self) -> None:
        # P_l(x, x) * omega_d = g_{l,d}
        for d in (1, 2):
            spec = KernelSpec.for_dimension(d)
            for ell in range(1, 6):
                self.assertAlmostEqual(projector_kernel(spec, ell, 1.0) * spec.omega_d, harmonic_dimension(spec, ell))

    def test_reproducing_property(self) -> None:
        # int P_l(x.y) P_m(y.z) dy = [l == m] P_l(x.z)
        raw = np.random.default_rng(8).standard_normal((2, 3))
        x, z = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        sphere = KernelSpec.for_dimension(2)
        points, weights = sphere_cubature(12)
        for ell in range(6):
            for m in range(6):
                integral = weights @ (
                    projector_kernel(sphere, ell, points @ x) * projector_kernel(sphere, m, points @ z)
                )
                expected = projector_kernel(sphere, ell, float(x @ z)) if ell == m else 0.0
                self.assertAlmostEqual(float(integral), expected, places=10, msg=f"l={ell} m={m}")

        circle = KernelSpec.for_dimension(1)
        angles, weights = circle_cubature(25)
        a, b = 0.4, 2.9
        for ell in range(6):
            for m in range(6):
                integral = weights @ (
                    projector_kernel(circle, ell, np.cos(angles - a)) * projector_kernel(circle, m, np.cos(angles - b))
                )
                expected = projector_kernel(circle, ell, math.cos(a - b)) if ell == m else 0.0
                self.assertAlmostEqual(float(integral), expected, places=10, msg=f"l={ell} m={m}")

    def test_circle_projector(self) -> None:
        spec = KernelSpec.for_dimension(1)
        theta = np.linspace(0.0, math.pi, 9)
        assert_allclose(projector_kernel(spec, 3, np.cos(theta)), np.cos(3 * theta) / math.pi, atol=1e-12)
        self.assertAlmostEqual(projector_kernel(spec, 0, 0.2), 1.0 / (2.0 * math.pi))

    def test_kernel_sum_matches_termwise(self) -> None:
        rng = np.random.default_rng(3)
        cos = rng.uniform(-1.0, 1.0, 50)
        ells = np.array([3, 4, 6, 7])
        coefs = rng.uniform(0.1, 1.0, ells.size)
        for d in (1, 2):
            spec = KernelSpec.for_dimension(d)
            expected = sum(c * projector_kernel(spec, int(ell), cos) for ell, c in zip(ells, coefs))
            assert_allclose(kernel_sum(spec, ells, coefs, cos), expected, rtol=1e-10, atol=1e-12)

    def test_kernel_sum_empty_band(self) -> None:
        spec = KernelSpec.for_dimension(2)
        assert_allclose(kernel_sum(spec, np.array([], dtype=int), np.array([]), np.zeros(3)), np.zeros(3))


if __name__ == "__main__":
    unittest.main()
