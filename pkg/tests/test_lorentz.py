import math
import os
import tempfile
import unittest

from hypothesis import given, settings, strategies as st
import numpy as np

from noncoercive.errors import ConstructionError, MissingOverride, ScheduleExhausted
from noncoercive.lorentz import (INFINITY, LorentzIndex, Provenance, SampledScalarField, SobolevConstant,
                                 dist_to_bounded, distribution_curve, distribution_function,
                                 export_distribution_curve, holder_pairing, is_in_closure, lorentz_quasinorm,
                                 sobolev_constant, truncate, truncation_residual, weak_norm)
from noncoercive.mesh import RadialMesh
from noncoercive.profiles import InverseRadiusProfile, PowerLawProfile
from noncoercive.utils import conjugate_exponent, read_csv


magnitudes = st.one_of(st.just(0.0), st.floats(1e-6, 1e3), st.floats(-1e3, -1e-6))
samples = st.lists(st.tuples(magnitudes, st.floats(1e-3, 10.0)), min_size=1, max_size=30)
products = st.lists(st.tuples(magnitudes, magnitudes, st.floats(1e-3, 10.0)), min_size=1, max_size=30)
scales = st.one_of(st.just(0.0), st.floats(1e-3, 100.0), st.floats(-100.0, -1e-3))


def field_of(pairs):
    values, weights = zip(*pairs)
    return SampledScalarField(np.arange(len(values)), values, weights)


class TestSampledScalarField(unittest.TestCase):
    def test_rejects_bad_weights(self):
        with self.assertRaises(ConstructionError):
            SampledScalarField([0.0, 1.0], [1.0, 2.0], [1.0, 0.0])
        with self.assertRaises(ConstructionError):
            SampledScalarField([0.0, 1.0], [1.0, 2.0], [1.0, 1.0], domain_measure=3.0)
        with self.assertRaises(ConstructionError):
            SampledScalarField([0.0], [1.0, 2.0], [1.0, 1.0])
        with self.assertRaises(ConstructionError):
            SampledScalarField([], [], [])

    def test_csv_round_trip(self):
        f = SampledScalarField([[0.0, 1.0], [2.0, 3.0]], [-1.5, 2.5], [0.25, 0.75])
        with tempfile.TemporaryDirectory() as temp_path:
            path = os.path.join(temp_path, 'field.csv')
            f.to_csv(path)
            g = SampledScalarField.from_csv(path)
        np.testing.assert_array_equal(g.values, f.values)
        np.testing.assert_array_equal(g.weights, f.weights)
        np.testing.assert_array_equal(g.points, f.points)


class TestLorentzIndex(unittest.TestCase):
    def test_validation(self):
        self.assertEqual(LorentzIndex(3).q, 3)
        self.assertTrue(LorentzIndex(2, INFINITY).is_weak)
        with self.assertRaises(ConstructionError):
            LorentzIndex(1.0)
        with self.assertRaises(ConstructionError):
            LorentzIndex(2.0, 0.5)
        with self.assertRaises(ConstructionError):
            LorentzIndex(2.0, math.inf)

    def test_dict(self):
        self.assertEqual(LorentzIndex.from_dict(LorentzIndex(2.0, INFINITY).to_dict()), LorentzIndex(2.0, INFINITY))
        self.assertEqual(LorentzIndex.from_dict({'p': 3.0}), LorentzIndex(3.0, 3.0))


class TestDistribution(unittest.TestCase):
    def setUp(self):
        self.f = SampledScalarField([0.0, 1.0, 2.0, 3.0], [1.0, -2.0, 3.0, 0.0], [1.0, 1.0, 1.0, 1.0])

    def test_strict_superlevel(self):
        self.assertEqual(distribution_function(self.f, 0.0), 3.0)
        self.assertEqual(distribution_function(self.f, 1.0), 2.0)
        self.assertEqual(distribution_function(self.f, 2.5), 1.0)
        self.assertEqual(distribution_function(self.f, 3.0), 0.0)
        np.testing.assert_array_equal(distribution_function(self.f, [0.5, 2.0]), [3.0, 1.0])
        with self.assertRaises(ValueError):
            distribution_function(self.f, -1.0)

    def test_curve(self):
        t, measures, scaled = distribution_curve(self.f, 2.0)
        np.testing.assert_array_equal(t, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(measures, [2.0, 1.0, 0.0])
        np.testing.assert_allclose(scaled, t * np.sqrt(measures))
        with tempfile.TemporaryDirectory() as temp_path:
            path = os.path.join(temp_path, 'curve.csv')
            export_distribution_curve(self.f, 2.0, path)
            header, data = read_csv(path)
        self.assertEqual(header, ['t', 'lambda', 't_lambda_1_p'])
        self.assertEqual(data.shape, (3, 3))

    @settings(max_examples=1000, deadline=None)
    @given(samples, st.floats(0.0, 2e3), st.floats(0.0, 2e3))
    def test_nonincreasing(self, pairs, s, t):
        f = field_of(pairs)
        low, high = min(s, t), max(s, t)
        self.assertGreaterEqual(distribution_function(f, low), distribution_function(f, high))
        self.assertLessEqual(distribution_function(f, low), math.fsum(f.weights) * (1 + 1e-12))
        self.assertEqual(distribution_function(f, f.max_abs), 0.0)

    def test_truncation(self):
        np.testing.assert_array_equal(truncate(self.f, 1.5).values, [1.0, -1.5, 1.5, 0.0])
        np.testing.assert_array_equal(truncation_residual(self.f, 1.5).values, [0.0, -0.5, 1.5, 0.0])
        with self.assertRaises(ValueError):
            truncate(self.f, 0.0)


class TestQuasinorm(unittest.TestCase):
    def test_constant(self):
        f = SampledScalarField([0.0, 1.0], [2.0, 2.0], [0.5, 1.5])
        self.assertAlmostEqual(lorentz_quasinorm(f, LorentzIndex(2.0)), 2.0 * math.sqrt(2.0), places=13)
        self.assertAlmostEqual(weak_norm(f, 2.0), 2.0 * math.sqrt(2.0), places=13)
        self.assertAlmostEqual(lorentz_quasinorm(f, LorentzIndex(2.0, 1.0)), 2.0 * math.sqrt(2.0) * 2.0, places=12)

    def test_zero(self):
        f = SampledScalarField([0.0, 1.0], [0.0, 0.0], [1.0, 1.0])
        self.assertEqual(lorentz_quasinorm(f, LorentzIndex(3.0)), 0.0)
        self.assertEqual(weak_norm(f, 3.0), 0.0)

    def test_quadrature_agrees(self):
        f = SampledScalarField([0.0, 1.0, 2.0], [1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
        exact = lorentz_quasinorm(f, LorentzIndex(2.0))
        self.assertAlmostEqual(exact, math.sqrt(14.0), places=12)
        quadrature = lorentz_quasinorm(f, LorentzIndex(2.0), method='quadrature')
        self.assertLess(abs(quadrature - exact), 1e-2 * exact)

    @settings(max_examples=1000, deadline=None)
    @given(samples, st.floats(1.1, 6.0))
    def test_diagonal_index_is_lebesgue_norm(self, pairs, p):
        f = field_of(pairs)
        expected = math.fsum(f.weights * np.abs(f.values) ** p) ** (1 / p)
        self.assertLessEqual(abs(lorentz_quasinorm(f, LorentzIndex(p)) - expected), 1e-9 * max(expected, 1e-300))

    @settings(max_examples=1000, deadline=None)
    @given(samples, st.floats(1.1, 6.0), st.floats(1.0, 8.0))
    def test_weak_norm_is_smallest(self, pairs, p, q):
        f = field_of(pairs)
        weak = weak_norm(f, p)
        strong = lorentz_quasinorm(f, LorentzIndex(p, q))
        self.assertLessEqual(weak, (q / p) ** (1 / q) * strong * (1 + 1e-9) + 1e-300)

    @settings(max_examples=1000, deadline=None)
    @given(samples, st.floats(1.1, 6.0), scales)
    def test_homogeneity(self, pairs, p, scale):
        f = field_of(pairs)
        scaled = f.with_values(scale * f.values)
        for idx in (LorentzIndex(p), LorentzIndex(p, INFINITY)):
            self.assertLessEqual(abs(lorentz_quasinorm(scaled, idx) - abs(scale) * lorentz_quasinorm(f, idx)),
                                 1e-9 * abs(scale) * lorentz_quasinorm(f, idx) + 1e-300)

    def test_holder_pairing(self):
        f = SampledScalarField([0.0, 1.0], [1.0, -2.0], [1.0, 3.0])
        g = f.with_values([3.0, 4.0])
        self.assertEqual(holder_pairing(f, g), 27.0)
        with self.assertRaises(ConstructionError):
            holder_pairing(f, SampledScalarField([0.0], [1.0], [4.0]))

    @settings(max_examples=1000, deadline=None)
    @given(products, st.floats(1.1, 6.0), st.floats(1.1, 8.0))
    def test_holder_inequality(self, triples, p, q):
        f_values, g_values, weights = zip(*triples)
        f = SampledScalarField(np.arange(len(weights)), f_values, weights)
        g = f.with_values(g_values)
        dual = LorentzIndex(conjugate_exponent(p), conjugate_exponent(q))
        bound = lorentz_quasinorm(f, LorentzIndex(p, q)) * lorentz_quasinorm(g, dual)
        self.assertLessEqual(holder_pairing(f, g), bound * (1 + 1e-9) + 1e-300)


class TestDistance(unittest.TestCase):
    def test_bounded_is_at_distance_zero(self):
        f = SampledScalarField([0.0, 1.0], [0.5, -0.75], [1.0, 1.0])
        self.assertEqual(dist_to_bounded(f, 2.0), 0.0)

    def test_inverse_radius(self):
        mesh = RadialMesh.geometric(2, 1.0, 1024, 1e-9)
        for B in (0.5, 1.0):
            distance = dist_to_bounded(mesh.lorentz_sample(InverseRadiusProfile(B)), 2.0)
            self.assertLess(abs(distance - B * math.sqrt(math.pi)), 1e-3 * B * math.sqrt(math.pi))

    def test_schedule_exhausted(self):
        mesh = RadialMesh.geometric(2, 1.0, 256, 1e-9)
        with self.assertRaises(ScheduleExhausted) as context:
            dist_to_bounded(mesh.lorentz_sample(InverseRadiusProfile(1.0)), 2.0, tol=1e-30, max_doublings=3)
        self.assertIsNotNone(context.exception.last_value)

    def test_closure(self):
        mesh = RadialMesh.geometric(2, 1.0, 4096, 1e-9)
        self.assertFalse(is_in_closure(mesh.lorentz_sample(InverseRadiusProfile(1.0)), 2.0))
        self.assertTrue(is_in_closure(mesh.lorentz_sample(PowerLawProfile(1.0, -0.5)), 2.0))
        bounded = SampledScalarField([0.0], [0.5], [1.0])
        result = is_in_closure(bounded, 2.0)
        self.assertTrue(result.in_closure)
        self.assertFalse(result.inconclusive)


class TestSobolevConstant(unittest.TestCase):
    def test_override(self):
        constant = sobolev_constant(3, 2.0, override=0.5)
        self.assertEqual(constant.value, 0.5)
        self.assertEqual(constant.provenance, Provenance.USER_OVERRIDE)
        self.assertEqual(constant.q, 2.0)
        self.assertEqual(SobolevConstant.from_dict(constant.to_dict()), constant)

    def test_missing_override(self):
        with self.assertRaises(MissingOverride):
            sobolev_constant(3, 2.0)

    def test_discrete_estimate(self):
        constant = sobolev_constant(3, 2.0, RadialMesh.uniform(3, 1.0, 128))
        self.assertEqual(constant.provenance, Provenance.DISCRETE_ESTIMATE)
        self.assertGreater(constant.value, 0.0)
        self.assertLess(constant.value, 10.0)
        self.assertEqual(constant.p_star, 6.0)

    def test_mesh_refinement_is_stable(self):
        for N, p in ((3, 2.0), (3, 1.5), (4, 2.5)):
            coarse = sobolev_constant(N, p, RadialMesh.uniform(N, 1.0, 512)).value
            fine = sobolev_constant(N, p, RadialMesh.uniform(N, 1.0, 1024)).value
            self.assertLess(abs(fine - coarse), 0.02 * fine, (N, p))

    def test_validation(self):
        with self.assertRaises(ConstructionError):
            SobolevConstant(2, 2.0, 1.0, Provenance.USER_OVERRIDE)
        with self.assertRaises(ConstructionError):
            SobolevConstant(3, 2.0, 0.0, Provenance.USER_OVERRIDE)
