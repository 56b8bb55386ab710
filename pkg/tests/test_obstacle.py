import os
import tempfile
import unittest

from hypothesis import given, settings, strategies as st
import numpy as np

from noncoercive.assembly import DiscreteFunction, RhsFunctional, assemble_residual, norm_w1p, random_test_functions
from noncoercive.errors import ConstructionError, NotAdmissible, ProjectionStalled
from noncoercive.fields import ModelData, model_field, random_samples, verify_structural
from noncoercive.lorentz import sobolev_constant
from noncoercive.mesh import RadialMesh
from noncoercive.obstacle import (Obstacle, add_back, admissible_probes, complementarity_residual, natural_residual,
                                  shift_obstacle, vi_frozen_solve, vi_truncation_scheme)
from noncoercive.oracles import obstacle_free_boundary
from noncoercive.profiles import InverseRadiusProfile, PowerLawProfile, VectorProfile
from noncoercive.solver import SolveConfig, frozen_solve, residual_threshold
from noncoercive.utils import write_csv


def laplacian():
    return model_field(ModelData(np.eye(3), p=2.0), N=3)


class TestObstacle(unittest.TestCase):
    def setUp(self):
        self.mesh = RadialMesh.uniform(3, 1.0, 8)

    def test_construction(self):
        self.assertEqual(Obstacle.constant(self.mesh, -0.5).psi[3], -0.5)
        self.assertTrue(Obstacle.unconstrained(self.mesh).is_unconstrained)
        self.assertFalse(Obstacle.constant(self.mesh, 0.0).is_unconstrained)
        with self.assertRaises(NotAdmissible):
            Obstacle.constant(self.mesh, 0.1)
        with self.assertRaises(ConstructionError):
            Obstacle(self.mesh, np.full(self.mesh.num_nodes, np.nan))
        with self.assertRaises(ConstructionError):
            Obstacle(self.mesh, np.zeros(3))
        profile = Obstacle.from_profile(self.mesh, lambda x: -np.linalg.norm(x, axis=1))
        np.testing.assert_allclose(profile.psi, -self.mesh.radii)

    def test_csv(self):
        psi = np.full(self.mesh.num_nodes, -np.inf)
        psi[:3] = -0.25
        with tempfile.TemporaryDirectory() as temp_path:
            path = os.path.join(temp_path, 'psi.csv')
            write_csv(path, ['r', 'psi'], [self.mesh.radii, psi])
            obstacle = Obstacle.from_csv(self.mesh, path)
            write_csv(path, ['r', 'phi'], [self.mesh.radii, psi])
            with self.assertRaises(ConstructionError):
                Obstacle.from_csv(self.mesh, path)
        np.testing.assert_array_equal(obstacle.psi, psi)

    def test_projection_and_contact(self):
        obstacle = Obstacle.constant(self.mesh, -0.5)
        u = DiscreteFunction.interpolate(self.mesh, lambda x: np.linalg.norm(x, axis=1) ** 2 - 1.0)
        projected = obstacle.project(u)
        self.assertFalse(obstacle.is_admissible(u))
        self.assertTrue(obstacle.is_admissible(projected))
        np.testing.assert_array_equal(obstacle.contact_nodes(projected), np.arange(6))
        with tempfile.TemporaryDirectory() as temp_path:
            path = os.path.join(temp_path, 'contact.csv')
            obstacle.export_contact(projected, path)
            self.assertTrue(os.path.exists(path))


class TestShift(unittest.TestCase):
    def setUp(self):
        self.mesh = RadialMesh.uniform(3, 1.0, 16)
        self.psi = lambda x: 0.1 - np.linalg.norm(x, axis=1) ** 2
        self.witness = DiscreteFunction.interpolate(self.mesh, lambda x: 0.1 * (1 - np.linalg.norm(x, axis=1) ** 2))

    def test_shift(self):
        field = laplacian()
        shifted, obstacle = shift_obstacle(field, self.psi, self.witness)
        self.assertTrue(np.all(obstacle.psi <= 0))
        np.testing.assert_allclose(obstacle.psi, -0.9 * self.mesh.radii ** 2, atol=1e-15)
        x = np.array([[0.3, 0.0, 0.0]])
        u, xi = np.array([0.2]), np.array([[1.0, 0.5, 0.0]])
        np.testing.assert_allclose(shifted(x, u, xi), field(x, u + self.witness.evaluate(x), xi + self.witness.gradient(x)))
        zero = DiscreteFunction.zeros(self.mesh)
        np.testing.assert_array_equal(add_back(zero, obstacle).coefficients, self.witness.coefficients)
        self.assertIs(add_back(zero, Obstacle.constant(self.mesh, -1.0)), zero)

    def test_shifted_envelope(self):
        rng = np.random.default_rng(5)
        for p in (1.5, 2.0, 2.5):
            data = ModelData(np.eye(3), VectorProfile(PowerLawProfile(0.2 ** (p - 1), -(p - 1))), p=p)
            field = model_field(data, InverseRadiusProfile(0.2), points=0.5 * np.eye(3), N=3)
            shifted, _ = shift_obstacle(field, self.psi, self.witness)
            envelope = shifted.envelope
            self.assertAlmostEqual(envelope.alpha, field.envelope.alpha / 2 ** p)
            self.assertAlmostEqual(envelope.beta, max(1.0, 2 ** (p - 2)) * field.envelope.beta)
            x = np.array([[0.5, 0.0, 0.0]])
            np.testing.assert_allclose(envelope.b(x), 2 * field.envelope.b(x))
            self.assertTrue(np.all(envelope.phi(x) > 0))
            for scale in (0.1, 1.0, 10.0):
                report = verify_structural(shifted, *random_samples(3, 2000, rng, scale))
                self.assertTrue(report.passed, report.to_dict())

    def test_zero_witness_keeps_envelope(self):
        field = laplacian()
        shifted, _ = shift_obstacle(field, -0.1, DiscreteFunction.zeros(self.mesh))
        self.assertIs(shifted.envelope, field.envelope)

    def test_bad_witness(self):
        with self.assertRaises(NotAdmissible):
            shift_obstacle(laplacian(), self.psi, DiscreteFunction.zeros(self.mesh))
        lifted = DiscreteFunction.interpolate(self.mesh, lambda x: np.ones(len(x)), zero_boundary=False)
        with self.assertRaises(NotAdmissible):
            shift_obstacle(laplacian(), self.psi, lifted)


class TestFrozenObstacle(unittest.TestCase):
    def setUp(self):
        self.mesh = RadialMesh.uniform(3, 1.0, 64)
        self.rhs = RhsFunctional.from_load(self.mesh, -3.0)
        self.obstacle = Obstacle.constant(self.mesh, -0.05)
        self.field = laplacian()
        self.zero = DiscreteFunction.zeros(self.mesh)

    def test_contact_radius(self):
        u = vi_frozen_solve(self.field, self.zero, self.rhs, self.obstacle)
        self.assertTrue(self.obstacle.is_admissible(u))
        natural = natural_residual(self.field, u, u, self.rhs, self.obstacle)
        self.assertLessEqual(np.linalg.norm(natural), residual_threshold(self.rhs, SolveConfig()))
        contact = self.obstacle.contact_nodes(u)
        radius = self.mesh.node_radius[contact].max()
        self.assertLess(abs(radius - obstacle_free_boundary(3, 2.0, -3.0, -0.05).a), 2 * self.mesh.mesh_size)

    def test_complementarity(self):
        u = vi_frozen_solve(self.field, self.zero, self.rhs, self.obstacle)
        probes = admissible_probes(u, self.obstacle)
        self.assertEqual(len(probes), 50 + 3 * 5 + 4 + 1)
        report = complementarity_residual(u, self.obstacle, self.field, self.rhs, probes)
        self.assertEqual(report.skipped, 0)
        self.assertEqual(len(report.slacks), len(probes))
        self.assertGreaterEqual(report.min_slack, -1e-8)
        self.assertGreater(report.contact_nodes, 0)
        self.assertGreater(report.contact_measure, 0.0)
        inadmissible = DiscreteFunction.interpolate(self.mesh, lambda x: np.full(len(x), -1.0))
        self.assertEqual(complementarity_residual(u, self.obstacle, self.field, self.rhs, [inadmissible]).skipped, 1)

    def test_unconstrained_is_equation(self):
        free = vi_frozen_solve(self.field, self.zero, self.rhs, Obstacle.unconstrained(self.mesh))
        equation = frozen_solve(self.field, self.zero, self.rhs)
        self.assertLess(norm_w1p(free - equation, 2.0), 1e-12)

    def test_projection_budget(self):
        with self.assertRaises(ProjectionStalled):
            vi_frozen_solve(self.field, self.zero, self.rhs, self.obstacle, SolveConfig(max_projection=1))


class TestTruncationScheme(unittest.TestCase):
    def test_lower_order_obstacle(self):
        mesh = RadialMesh.uniform(3, 1.0, 16)
        data = ModelData(np.eye(3), VectorProfile(PowerLawProfile(0.05, -1.0)), p=2.0)
        field = model_field(data, InverseRadiusProfile(0.05), points=0.5 * np.eye(3), N=3)
        rhs = RhsFunctional.from_load(mesh, -3.0)
        obstacle = Obstacle.constant(mesh, -0.05)
        sobolev = sobolev_constant(3, 2.0, override=1.0)
        u, report = vi_truncation_scheme(field, rhs, obstacle, sobolev=sobolev, probe_count=10)
        self.assertTrue(report.converged)
        self.assertTrue(obstacle.is_admissible(u))
        complementarity = report.diagnostics['complementarity']
        self.assertGreaterEqual(complementarity['min_slack'], -SolveConfig().vi_tol)
        self.assertGreater(complementarity['contact_nodes'], 0)
        self.assertEqual({entry['scale'] for entry in report.diagnostics['gamma_family']}, {0.1, 1.0, 10.0})

        free, free_report = vi_truncation_scheme(field, rhs, Obstacle.unconstrained(mesh), sobolev=sobolev)
        self.assertNotIn('complementarity', free_report.diagnostics)
        self.assertLess(free.coefficients[0], -0.05)


seeds = st.integers(0, 2 ** 32 - 1)


class TestObstacleProperties(unittest.TestCase):
    @settings(max_examples=1000, deadline=None)
    @given(st.floats(2.0, 2.8), st.floats(0.1, 2.0), st.floats(0.0, 1.0), seeds)
    def test_shift_preserves_natural_residual(self, p, load, depth, seed):
        mesh = RadialMesh.uniform(3, 1.0, 16)
        data = ModelData(np.eye(3), VectorProfile(PowerLawProfile(0.2 ** (p - 1), -(p - 1))), p=p)
        field = model_field(data, InverseRadiusProfile(0.2), points=0.5 * np.eye(3), N=3)
        rhs = RhsFunctional.from_load(mesh, load)
        g, u, v, bump = random_test_functions(mesh, 4, np.random.default_rng(seed))
        psi = g.coefficients - depth * np.abs(bump.coefficients)
        shifted, obstacle = shift_obstacle(field, psi, g)

        natural = natural_residual(shifted, v, u, rhs, obstacle)
        lifted = u + g
        expected = np.minimum(assemble_residual(field, v + g, lifted, rhs), lifted.coefficients - psi)
        expected[mesh.boundary_nodes] = 0.0
        np.testing.assert_allclose(natural, expected, rtol=1e-10, atol=1e-10 * (1 + np.abs(expected).max()))

    @settings(max_examples=1000, deadline=None)
    @given(st.floats(1.0, 6.0), st.floats(0.01, 0.1), st.floats(0.005, 0.1))
    def test_lower_obstacle_has_smaller_contact_set(self, load, depth, drop):
        mesh = RadialMesh.uniform(3, 1.0, 32)
        field = laplacian()
        rhs = RhsFunctional.from_load(mesh, -load)
        zero = DiscreteFunction.zeros(mesh)
        upper_obstacle = Obstacle.constant(mesh, -depth)
        lower_obstacle = Obstacle.constant(mesh, -depth - drop)
        upper = vi_frozen_solve(field, zero, rhs, upper_obstacle)
        lower = vi_frozen_solve(field, zero, rhs, lower_obstacle)
        self.assertTrue(np.all(lower.coefficients <= upper.coefficients + 1e-6))
        touching = set(upper_obstacle.contact_nodes(upper, tolerance=1e-6))
        self.assertLessEqual(set(lower_obstacle.contact_nodes(lower)), touching)
