import math
import os
import tempfile
import unittest

from hypothesis import given, settings, strategies as st
import numpy as np
from scipy.sparse.linalg import spsolve

from noncoercive.assembly import (DiscreteFunction, RhsFunctional, RhsKind, arctan_family, assemble_jacobian,
                                  assemble_residual, convection_matrix, gradient_error, lp_norm, mass_matrix,
                                  monotonicity_pairing, norm_w1p, random_test_functions, stiffness_matrix, to_sampled,
                                  weak_form_defect)
from noncoercive.errors import ConstructionError, MeshMismatch
from noncoercive.fields import ModelData, model_field
from noncoercive.mesh import PlanarMesh, RadialMesh


def cone(mesh):
    return DiscreteFunction.interpolate(mesh, lambda x: 1.0 - np.linalg.norm(x, axis=1))


class TestDiscreteFunction(unittest.TestCase):
    def setUp(self):
        self.mesh = RadialMesh.uniform(3, 1.0, 8)

    def test_boundary(self):
        with self.assertRaises(ConstructionError):
            DiscreteFunction(self.mesh, np.ones(self.mesh.num_nodes))
        with self.assertRaises(ConstructionError):
            DiscreteFunction(self.mesh, np.zeros(3))
        free = DiscreteFunction.interpolate(self.mesh, lambda x: np.ones(len(x)), zero_boundary=False)
        self.assertEqual(free.coefficients[-1], 1.0)
        self.assertFalse(free.zero_boundary)
        self.assertEqual(DiscreteFunction.interpolate(self.mesh, lambda x: np.ones(len(x))).coefficients[-1], 0.0)

    def test_arithmetic(self):
        u = cone(self.mesh)
        np.testing.assert_allclose((u + u).coefficients, (2 * u).coefficients)
        np.testing.assert_allclose((u - u).coefficients, 0.0)
        np.testing.assert_allclose((-u).coefficients, -u.coefficients)
        self.assertEqual(u.max_abs, 1.0)
        with self.assertRaises(MeshMismatch):
            u + cone(RadialMesh.uniform(3, 1.0, 9))

    def test_csv_round_trip(self):
        u = cone(self.mesh)
        with tempfile.TemporaryDirectory() as temp_path:
            path = os.path.join(temp_path, 'u.csv')
            u.to_csv(path)
            np.testing.assert_array_equal(DiscreteFunction.from_csv(self.mesh, path).coefficients, u.coefficients)
            with self.assertRaises(ConstructionError):
                DiscreteFunction.from_csv(RadialMesh.uniform(3, 1.0, 9), path)
            with self.assertRaises(MeshMismatch):
                DiscreteFunction.from_csv(RadialMesh.uniform(3, 2.0, 8), path)

    def test_norms(self):
        u = cone(self.mesh)
        self.assertAlmostEqual(norm_w1p(u, 2.0), math.sqrt(4 * math.pi / 3), places=12)
        self.assertAlmostEqual(lp_norm(u, 2.0), math.sqrt(2 * math.pi / 15), places=12)
        error = gradient_error(u, lambda x: -x / np.linalg.norm(x, axis=1)[:, None], 3.0)
        self.assertLess(error, 1e-12)
        gradient = to_sampled(u, 'gradient')
        np.testing.assert_allclose(gradient.values, 1.0)
        self.assertAlmostEqual(gradient.domain_measure, self.mesh.measure)
        with self.assertRaises(ValueError):
            to_sampled(u, 'hessian')


class TestRhsFunctional(unittest.TestCase):
    def test_load(self):
        mesh = PlanarMesh.unit_square(4)
        rhs = RhsFunctional.from_load(mesh, 1.0)
        self.assertEqual(rhs.kind, RhsKind.LOAD)
        self.assertAlmostEqual(rhs.load_vector().sum(), 1.0, places=14)
        self.assertFalse(rhs.is_zero)
        self.assertTrue(RhsFunctional.zero(mesh).is_zero)

    def test_flux_and_divergence_annihilate_constants(self):
        mesh = PlanarMesh.unit_square(4)
        constant = lambda x: np.tile([1.0, 0.5], (len(x), 1))
        for rhs in (RhsFunctional.from_flux(mesh, constant, 3.0), RhsFunctional.from_divergence(mesh, constant)):
            self.assertAlmostEqual(rhs.load_vector().sum(), 0.0, places=13)

    def test_flux_pairing(self):
        mesh = RadialMesh.uniform(3, 1.0, 8)
        u = cone(mesh)
        rhs = RhsFunctional.from_flux(mesh, lambda x: x, 2.0)
        # <div x, u> = -int x . grad u = int |x| = pi
        self.assertAlmostEqual(rhs.pairing(u), math.pi, places=12)
        with self.assertRaises(MeshMismatch):
            rhs.pairing(cone(RadialMesh.uniform(3, 1.0, 4)))

    def test_vector(self):
        mesh = RadialMesh.uniform(3, 1.0, 4)
        with self.assertRaises(ConstructionError):
            RhsFunctional.from_vector(mesh, np.ones(3))
        rhs = RhsFunctional.from_vector(mesh, np.arange(5.0))
        self.assertEqual(rhs.pairing(cone(mesh)), 0.75 + 2 * 0.5 + 3 * 0.25)


class TestAssembly(unittest.TestCase):
    def setUp(self):
        self.mesh = RadialMesh.uniform(3, 1.0, 16)
        self.field = model_field(ModelData(np.eye(3), p=2.0), N=3)
        self.rhs = RhsFunctional.from_load(self.mesh, 1.0)

    def test_linear_jacobian_is_stiffness(self):
        u = cone(self.mesh)
        jacobian = assemble_jacobian(self.field, u, u).toarray()
        np.testing.assert_allclose(jacobian, stiffness_matrix(self.mesh, constrained=True).toarray(), atol=1e-12)

    def test_linear_residual(self):
        u = cone(self.mesh)
        expected = stiffness_matrix(self.mesh) @ u.coefficients - self.rhs.load_vector()
        expected[self.mesh.boundary_nodes] = 0.0
        np.testing.assert_allclose(assemble_residual(self.field, u, u, self.rhs), expected, atol=1e-12)

    def test_discrete_solution_has_no_defect(self):
        load = self.rhs.load_vector().copy()
        load[self.mesh.boundary_nodes] = 0.0
        coefficients = spsolve(stiffness_matrix(self.mesh, constrained=True).tocsc(), load)
        coefficients[self.mesh.boundary_nodes] = 0.0
        u = DiscreteFunction(self.mesh, coefficients)
        for w in random_test_functions(self.mesh, 5, np.random.default_rng(0)):
            self.assertAlmostEqual(weak_form_defect(self.field, u, self.rhs, w), 0.0, places=10)

    def test_mass_and_convection(self):
        mesh = PlanarMesh.unit_square(3)
        self.assertAlmostEqual(mass_matrix(mesh).sum(), 1.0, places=13)
        convection = convection_matrix(mesh, lambda x: np.tile([2.0, -1.0], (len(x), 1)))
        np.testing.assert_allclose(convection @ np.ones(mesh.num_nodes), 0.0, atol=1e-13)

    def test_monotonicity_pairing(self):
        rng = np.random.default_rng(1)
        for p in (1.5, 2.5):
            field = model_field(ModelData(np.diag([1.0, 2.0, 3.0]), p=p), N=3)
            u1, u2, v = random_test_functions(self.mesh, 3, rng)
            for scale in (0.1, 1.0):
                self.assertGreaterEqual(monotonicity_pairing(field, v, u1, u2, scale), 0.0)

    def test_arctan_family(self):
        gamma, derivative = arctan_family(2.0)
        self.assertAlmostEqual(gamma(2.0), 2.0 * math.pi / 4)
        self.assertEqual(derivative(0.0), 1.0)
        self.assertAlmostEqual(derivative(2.0), 0.5)


seeds = st.integers(0, 2 ** 32 - 1)


class TestAssemblyProperties(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = RadialMesh.uniform(3, 1.0, 16)

    @settings(max_examples=1000, deadline=None)
    @given(st.floats(1.2, 2.9), st.lists(st.floats(0.5, 2.0), min_size=3, max_size=3), st.floats(1e-2, 10.0),
           st.floats(0.1, 10.0), seeds)
    def test_monotonicity_pairing_is_nonnegative(self, p, diagonal, scale, amplitude, seed):
        field = model_field(ModelData(np.diag(diagonal), p=p), N=3)
        u1, u2, v = random_test_functions(self.mesh, 3, np.random.default_rng(seed))
        self.assertGreaterEqual(monotonicity_pairing(field, v, amplitude * u1, u2, scale), -1e-12)

    @settings(max_examples=1000, deadline=None)
    @given(st.floats(1.2, 2.9), st.floats(0.5, 2.0), st.floats(0.0, 0.2), seeds)
    def test_jacobian_matches_finite_differences(self, p, amplitude, noise, seed):
        rng = np.random.default_rng(seed)
        field = model_field(ModelData(np.diag(rng.uniform(0.5, 2.0, 3)), p=p), N=3)
        rhs = RhsFunctional.from_load(self.mesh, 1.0)
        jitter = noise * self.mesh.mesh_size * rng.uniform(-1.0, 1.0, self.mesh.num_nodes)
        jitter[self.mesh.boundary_nodes] = 0.0
        u = amplitude * cone(self.mesh) + DiscreteFunction(self.mesh, jitter)
        delta, = random_test_functions(self.mesh, 1, rng)
        delta = (1.0 / np.linalg.norm(delta.cell_gradients(), axis=1).max()) * delta

        base = assemble_residual(field, u, u, rhs)
        exact = assemble_jacobian(field, u, u, rhs) @ delta.coefficients
        floor = 1e-8 * (np.linalg.norm(exact) + np.linalg.norm(base))
        errors = {}
        for eps in (1e-3, 1e-4, 1e-5):
            moved = u + eps * delta
            quotient = (assemble_residual(field, u, moved, rhs) - base) / eps
            errors[eps] = np.linalg.norm(quotient - exact)
        self.assertLessEqual(errors[1e-4], 0.2 * errors[1e-3] + floor)
        self.assertLessEqual(errors[1e-5], 0.05 * errors[1e-3] + floor)
        self.assertLessEqual(errors[1e-5], 1e-2 * np.linalg.norm(exact) + floor)
