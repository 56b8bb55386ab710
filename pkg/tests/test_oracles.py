import math
import unittest

import numpy as np
from scipy.integrate import quad

from noncoercive.errors import OutOfRange
from noncoercive.oracles import (adjoint_gradient, adjoint_solution, ball_dirichlet_eigenvalue, concentration_exponent,
                                 concentration_gradient, concentration_gradient_norm, concentration_profile,
                                 dist_radial_exact, obstacle_free_boundary, radial_plaplace_gradient,
                                 radial_plaplace_profile, regularity_exponents)
from noncoercive.utils import unit_ball_measure


def on_axis(r, N):
    points = np.zeros((len(r), N))
    points[:, 0] = r
    return points


class TestRadialPLaplace(unittest.TestCase):
    def test_laplace(self):
        r = np.linspace(0, 1, 5)
        np.testing.assert_allclose(radial_plaplace_profile(r, 3, 2.0), (1 - r ** 2) / 6)

    def test_gradient_matches_profile(self):
        r = np.array([0.2, 0.5, 0.9])
        h = 1e-6
        for p in (1.5, 2.5, 4.0):
            derivative = (radial_plaplace_profile(r + h, 5, p, 2.0) - radial_plaplace_profile(r - h, 5, p, 2.0)) / (2 * h)
            np.testing.assert_allclose(radial_plaplace_gradient(on_axis(r, 5), 5, p, 2.0)[:, 0], derivative, rtol=1e-6)


class TestFreeBoundary(unittest.TestCase):
    def test_contact(self):
        solution = obstacle_free_boundary(3, 2.0, -3.0, -0.05)
        a = solution.a
        # for p = 2, N = 3, f = -3 the contact radius solves 1/2 - 3a^2/2 + a^3 = 0.05
        self.assertAlmostEqual(0.5 - 1.5 * a ** 2 + a ** 3, 0.05, places=8)
        self.assertAlmostEqual(a, 0.804, places=2)
        np.testing.assert_allclose(solution(np.array([0.0, 0.5 * a, a])), -0.05)
        self.assertAlmostEqual(float(solution(np.array([1.0]))[0]), 0.0, places=14)
        self.assertAlmostEqual(float(solution(np.array([a + 1e-6]))[0]), -0.05, places=8)
        self.assertAlmostEqual(solution.contact_measure, unit_ball_measure(3) * a ** 3)
        np.testing.assert_array_equal(solution.gradient(on_axis([0.5 * a], 3)), 0.0)

    def test_no_contact(self):
        solution = obstacle_free_boundary(3, 2.0, -3.0, -1.0)
        self.assertEqual(solution.a, 0.0)
        self.assertEqual(solution.contact_measure, 0.0)
        self.assertAlmostEqual(float(solution(np.array([0.0]))[0]), -0.5, places=10)

    def test_range(self):
        with self.assertRaises(OutOfRange):
            obstacle_free_boundary(3, 2.0, -1.0, 0.1)
        with self.assertRaises(OutOfRange):
            obstacle_free_boundary(3, 2.0, 1.0, -0.1)


class TestConcentration(unittest.TestCase):
    def test_profile(self):
        N, p = 3, 2.0
        g = concentration_exponent(N, p)
        self.assertEqual(g, -0.5)
        for n in (1, 4):
            values = concentration_profile(np.array([0.0, 0.5 / n, 2.0 / n, 3.0 / n]), n, N, p)
            np.testing.assert_allclose(values, [n ** 0.5 * (1 - 2 ** g), n ** 0.5 * (1 - 2 ** g), 0.0, 0.0])
        with self.assertRaises(OutOfRange):
            concentration_exponent(2, 2.0)

    def test_gradient_norm_is_scale_invariant(self):
        N, p = 3, 2.0
        surface = N * unit_ball_measure(N)
        expected = concentration_gradient_norm(N, p)
        for n in (1, 8):
            def integrand(r):
                slope = concentration_gradient(on_axis([r], N), n, N, p)[0, 0]
                return abs(slope) ** p * surface * r ** (N - 1)
            value = quad(integrand, 1.0 / n, 2.0 / n, epsabs=1e-13, epsrel=1e-12)[0]
            self.assertAlmostEqual(value, expected, places=9)


class TestAdjoint(unittest.TestCase):
    def test_solves_adjoint_equation(self):
        N, h = 4, 1e-4
        for gamma in (1.5, 2.0, 3.0):
            r = 0.5
            v = lambda s: adjoint_solution(s, gamma, N)
            second = (v(r + h) - 2 * v(r) + v(r - h)) / h ** 2
            first = adjoint_gradient(on_axis([r], N), gamma, N)[0, 0]
            laplacian = second + (N - 1) / r * first
            self.assertAlmostEqual(-laplacian + gamma / r * first, 0.0, places=5)
            self.assertEqual(adjoint_solution(1.0, gamma, N), 0.0)

    def test_logarithmic_case(self):
        self.assertAlmostEqual(float(adjoint_solution(0.5, 1.0, 3)), math.log(0.5))

    def test_range(self):
        with self.assertRaises(OutOfRange):
            adjoint_solution(0.5, 0.0, 3)
        with self.assertRaises(OutOfRange):
            adjoint_solution(0.5, 3.5, 4)


class TestConstants(unittest.TestCase):
    def test_eigenvalues(self):
        self.assertAlmostEqual(ball_dirichlet_eigenvalue(3), math.pi ** 2, places=10)
        self.assertAlmostEqual(ball_dirichlet_eigenvalue(2), 2.404825557695773 ** 2, places=10)
        self.assertAlmostEqual(ball_dirichlet_eigenvalue(2, 2.0), 2.404825557695773 ** 2 / 4, places=10)

    def test_distance(self):
        self.assertAlmostEqual(dist_radial_exact(1.0, 2), math.sqrt(math.pi))
        self.assertAlmostEqual(dist_radial_exact(0.5, 3), 0.5 * (4 * math.pi / 3) ** (1 / 3))

    def test_regularity_exponents(self):
        self.assertEqual(regularity_exponents(3, 1.5, 2.5), [(2.5, 15.0, 4.0)])
        stages = regularity_exponents(10, 2.0, 7.0)
        self.assertEqual(stages[0][0], 2.5)
        self.assertEqual(stages[-1][0], 7.0)
        self.assertAlmostEqual(stages[-1][1], 70 / 3)
        for (s, s_star, _), (t, _, _) in zip(stages[:-2], stages[1:-1]):
            self.assertEqual(t, s_star)
        with self.assertRaises(OutOfRange):
            regularity_exponents(3, 2.0, 1.5)
