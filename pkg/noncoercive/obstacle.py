"""
Obstacle problems ``u >= psi``.

Obstacles are kept nonpositive: a positive obstacle is first shifted by an admissible
witness ``g`` (:func:`shift_obstacle`), which turns ``A`` into
``A~(x, u, xi) = A(x, u + g, xi + grad g)`` and ``psi`` into ``psi - g <= 0``. Then 0 is
admissible and the homotopy ``u = t F(u)`` never leaves the admissible set.
"""
from dataclasses import dataclass, field as dataclass_field
import logging
import math

import numpy as np

from .assembly import (DiscreteFunction, arctan_family, assemble_jacobian, assemble_residual, norm_w1p,
                       random_test_functions)
from .errors import ConstructionError, NotAdmissible, ProjectionStalled, SingularLinearization
from .fields import FieldKind, QuasilinearField, truncate_field
from .profiles import Profile
from .solver import (NewtonOutcome, SolveConfig, _solve_linear, frozen_solve, laplace_guess, residual_threshold,
                     truncation_continuation)
from .utils import read_csv, write_csv


logger = logging.getLogger(__name__)

CONTACT_TOLERANCE = 1e-10
GAMMA_SCALES = (0.1, 1.0, 10.0)
NONMONOTONE_MEMORY = 5


def _nodal(mesh, psi):
    if isinstance(psi, (int, float)):
        return np.full(mesh.num_nodes, float(psi))
    if isinstance(psi, Profile) or callable(psi):
        return np.asarray(psi(mesh.nodes), dtype=float).reshape(-1)
    return np.array(psi, dtype=float).reshape(-1)


class Obstacle:
    """
    Nodal obstacle ``psi <= 0`` on ``mesh``; ``-inf`` marks unconstrained nodes.

    The zero function is the admissibility witness. ``original_shift`` is the witness ``g``
    of a shifted problem, added back by :func:`add_back`.

    :raises NotAdmissible: if ``psi`` is positive somewhere (shift it first).
    """
    def __init__(self, mesh, psi, original_shift=None):
        psi = _nodal(mesh, psi)
        if len(psi) != mesh.num_nodes:
            raise ConstructionError('obstacle has {} values for {} nodes'.format(len(psi), mesh.num_nodes))
        if np.any(np.isnan(psi)) or np.any(psi == np.inf):
            raise ConstructionError('obstacle values must be numbers or -inf')
        if np.any(psi > 0):
            raise NotAdmissible('obstacle is positive at {} nodes; shift it by an admissible witness first'.format(
                int(np.count_nonzero(psi > 0))))
        psi.flags.writeable = False
        self.mesh = mesh
        self.psi = psi
        self.original_shift = original_shift

    @staticmethod
    def constant(mesh, value):
        return Obstacle(mesh, float(value))

    @staticmethod
    def from_profile(mesh, profile):
        return Obstacle(mesh, profile)

    @staticmethod
    def unconstrained(mesh):
        return Obstacle(mesh, -np.inf)

    @staticmethod
    def from_csv(mesh, path):
        """
        Reads one ``psi`` column per node; ``-inf`` is accepted.
        """
        header, data = read_csv(path)
        if header[-1] != 'psi':
            raise ConstructionError('{}: last column must be psi'.format(path))
        return Obstacle(mesh, data[:, -1])

    @property
    def is_unconstrained(self):
        return bool(np.all(self.psi == -np.inf))

    def project(self, u):
        return DiscreteFunction(self.mesh, np.maximum(u.coefficients, self.psi))

    def is_admissible(self, w):
        return bool(np.all(w.coefficients >= self.psi) and np.all(w.coefficients[self.mesh.boundary_nodes] == 0))

    def contact_nodes(self, u, tolerance=CONTACT_TOLERANCE):
        return np.flatnonzero(np.abs(u.coefficients - self.psi) <= tolerance)

    def export_contact(self, u, path):
        write_csv(path, ['node'], [self.contact_nodes(u)])


def shift_obstacle(field, psi_raw, g):
    """
    Reduces ``u >= psi_raw`` to a nonpositive obstacle with the witness ``g``.

    The shifted field carries the envelope from
    :meth:`~noncoercive.fields.StructuralEnvelope.shifted`; a zero witness keeps the original one.

    :returns: ``(shifted_field, obstacle)``; solve with them, then :func:`add_back`.
    :raises NotAdmissible: if ``g < psi_raw`` at a node or ``g`` does not vanish on the boundary.
    """
    mesh = g.mesh
    psi = _nodal(mesh, psi_raw)
    if not g.zero_boundary or np.any(g.coefficients[mesh.boundary_nodes] != 0):
        raise NotAdmissible('witness does not vanish on the boundary, so it is not in W^(1,p)_0')
    below = g.coefficients < psi
    if np.any(below):
        raise NotAdmissible('witness lies below the obstacle at {} nodes'.format(int(np.count_nonzero(below))))

    def evaluator(x, u, xi):
        return field.evaluator(x, u + g.evaluate(x), xi + g.gradient(x))

    def xi_derivative(x, u, xi):
        return field.jacobian_xi(x, u + g.evaluate(x), xi + g.gradient(x))

    if np.any(g.coefficients != 0):
        envelope = field.envelope.shifted(g.evaluate, g.gradient)
    else:
        envelope = field.envelope
    shifted = QuasilinearField(evaluator, envelope, FieldKind.CUSTOM, xi_derivative=xi_derivative)
    return shifted, Obstacle(mesh, psi - g.coefficients, original_shift=g)


def add_back(u, obstacle):
    if obstacle.original_shift is None:
        return u
    return u + obstacle.original_shift


def natural_residual(field, v, u, rhs, obstacle):
    """
    ``min(R(u), u - psi)`` node by node; zero exactly at solutions of the discrete
    obstacle problem.
    """
    residual = assemble_residual(field, v, u, rhs)
    natural = np.minimum(residual, u.coefficients - obstacle.psi)
    natural[obstacle.mesh.boundary_nodes] = 0.0
    return natural


def _projected_search(natural_of, u, direction, psi, reference, config, boundary):
    step = 1.0
    while step >= config.min_step:
        trial = np.maximum(u + step * direction, psi)
        trial[boundary] = 0.0
        natural = natural_of(trial)
        norm = float(np.linalg.norm(natural))
        if math.isfinite(norm) and norm <= (1 - config.armijo * step) * reference:
            return trial, norm
        step *= config.backtrack_factor
    return None


def projected_solve(field, v, rhs, obstacle, config, u0):
    """
    Primal-dual active set iteration for the frozen obstacle problem.

    The active set is predicted where ``u - psi < R / diag(J)``; the step solves the Jacobian
    restricted to the inactive nodes and lands on ``psi`` on the active ones. Iterates are
    projected onto ``u >= psi``, so admissibility holds exactly at every step. A
    non-monotone Armijo test on the natural residual guards the step, and a Jacobi-scaled
    projected gradient step is the fallback.

    :raises ProjectionStalled: if neither step decreases the natural residual or
        ``max_projection`` is exhausted.
    """
    mesh = v.mesh
    psi = obstacle.psi
    boundary = mesh.boundary_nodes
    free = mesh.free_mask
    threshold = residual_threshold(rhs, config)

    def natural_of(coefficients):
        return natural_residual(field, v, DiscreteFunction(mesh, coefficients), rhs, obstacle)

    u = np.maximum(u0.coefficients, psi)
    u[boundary] = 0.0
    history = [float(np.linalg.norm(natural_of(u)))]
    iteration = 0
    while history[-1] > threshold:
        if iteration >= config.max_projection:
            raise ProjectionStalled('obstacle iteration stopped at natural residual {:.3e}'.format(history[-1]))
        iteration += 1
        current = DiscreteFunction(mesh, u)
        residual = assemble_residual(field, v, current, rhs)
        J = assemble_jacobian(field, v, current, rhs).tocsr()
        diagonal = J.diagonal()
        with np.errstate(divide='ignore', invalid='ignore'):
            active = free & (u - psi < residual / diagonal)
        inactive = free & ~active
        direction = np.zeros_like(u)
        direction[active] = psi[active] - u[active]
        reference = max(history[-NONMONOTONE_MEMORY:])
        accepted = None
        try:
            if np.any(inactive):
                block = J[inactive][:, inactive]
                coupling = J[inactive][:, active] @ direction[active]
                direction[inactive] = _solve_linear(block, -residual[inactive] - coupling)
            accepted = _projected_search(natural_of, u, direction, psi, reference, config, boundary)
        except SingularLinearization as e:
            logger.warning('singular inactive block (%s), taking a projected gradient step', e)
        if accepted is None:
            jacobi = np.zeros_like(u)
            jacobi[free] = -residual[free] / diagonal[free]
            accepted = _projected_search(natural_of, u, jacobi, psi, reference, config, boundary)
        if accepted is None:
            raise ProjectionStalled('no decrease of the natural residual {:.3e} in iteration {}'.format(
                history[-1], iteration))
        u, norm = accepted
        history.append(norm)
        logger.debug('obstacle iteration %d: natural residual %.3e, %d active nodes',
                     iteration, norm, int(np.count_nonzero(active)))
    return NewtonOutcome(DiscreteFunction(mesh, u), iteration, history[-1])


def vi_frozen_solve(field, v, rhs, obstacle, config=None, u0=None):
    """
    Solves the frozen variational inequality
    ``int <A(x, v, grad u), grad (w - u)> >= <Phi, w - u>`` for all admissible ``w``.

    The unconstrained obstacle is exactly :func:`~noncoercive.solver.frozen_solve`.
    """
    config = config or SolveConfig()
    if obstacle.is_unconstrained:
        return frozen_solve(field, v, rhs, config, u0)
    if u0 is None:
        u0 = laplace_guess(rhs)
    return projected_solve(field, v, rhs, obstacle, config, u0).solution


@dataclass
class ComplementarityReport:
    slacks: list = dataclass_field(default_factory=list)
    normalized_slacks: list = dataclass_field(default_factory=list)
    min_slack: float = 0.0
    skipped: int = 0
    contact_nodes: int = 0
    contact_measure: float = 0.0
    contact_radius: float = 0.0

    def to_dict(self):
        return dict(self.__dict__)


def complementarity_residual(u, obstacle, field, rhs, probes):
    """
    Signed slacks ``int <A(x, u, grad u), grad (w - u)> - <Phi, w - u>`` for admissible
    probes ``w``, normalized by ``||grad (w - u)||_p``. Inadmissible probes are skipped and
    counted.

    Contact statistics count nodes with ``|u - psi| <= 1e-10``.
    """
    mesh = u.mesh
    p = field.p
    residual = assemble_residual(field, u, u, rhs)
    report = ComplementarityReport()
    for w in probes:
        if not obstacle.is_admissible(w):
            report.skipped += 1
            continue
        gap = w - u
        slack = float(residual @ gap.coefficients)
        size = norm_w1p(gap, p)
        report.slacks.append(slack)
        report.normalized_slacks.append(slack / size if size > 0 else 0.0)
    if report.normalized_slacks:
        report.min_slack = float(min(report.normalized_slacks))
    contact = obstacle.contact_nodes(u)
    report.contact_nodes = int(len(contact))
    report.contact_measure = float(mesh.lumped_mass[contact].sum())
    report.contact_radius = float(mesh.node_radius[contact].max()) if len(contact) else 0.0
    return report


def admissible_probes(u, obstacle, count=50, scales=GAMMA_SCALES, seed=0, gamma_count=5):
    """
    Admissible test functions around ``u``:

    - ``count`` random ``v = max(u + a rho, psi)`` with smooth random ``rho``
    - ``w = u - gamma(u - v)`` with ``gamma(s) = lam * arctan(s / lam)`` for every ``lam`` in
      ``scales`` and the first ``gamma_count`` random ``v``
    - ``u +- e rho`` with ``rho`` restricted to nodes well above the obstacle
    - ``u`` itself
    """
    mesh = u.mesh
    psi = obstacle.psi
    rng = np.random.default_rng(seed)
    amplitude = max(u.max_abs, 1e-3)
    probes = []
    randoms = []
    for rho in random_test_functions(mesh, count, rng):
        coefficients = np.maximum(u.coefficients + amplitude * rho.coefficients / max(rho.max_abs, 1e-300), psi)
        v = DiscreteFunction(mesh, coefficients)
        randoms.append(v)
        probes.append(v)
    for scale in scales:
        gamma, _ = arctan_family(scale)
        for v in randoms[:gamma_count]:
            w = np.maximum(u.coefficients - gamma(u.coefficients - v.coefficients), psi)
            probes.append(DiscreteFunction(mesh, w))
    epsilon = 1e-3 * amplitude
    for rho in random_test_functions(mesh, 2, rng):
        direction = rho.coefficients / max(rho.max_abs, 1e-300)
        direction = np.where(u.coefficients - psi > 2 * epsilon * np.abs(direction), direction, 0.0)
        for sign in (1.0, -1.0):
            probes.append(DiscreteFunction(mesh, u.coefficients + sign * epsilon * direction))
    probes.append(u)
    return probes


def vi_truncation_scheme(field, rhs, obstacle, config=None, sobolev=None, probe_count=50):
    """
    Truncation scheme for the obstacle problem. Records the ``lam * arctan(s / lam)``
    monotonicity diagnostics between successive levels and the complementarity report of
    the final iterate against :func:`admissible_probes`.

    :returns: ``(u, report)``.
    """
    config = config or SolveConfig()
    if obstacle.is_unconstrained:
        return truncation_continuation(field, rhs, config, sobolev)
    u, report = truncation_continuation(field, rhs, config, sobolev, obstacle=obstacle, gamma_scales=GAMMA_SCALES)
    final_field = truncate_field(field, report.levels[-1].level)
    probes = admissible_probes(u, obstacle, probe_count, seed=config.seed)
    complementarity = complementarity_residual(u, obstacle, final_field, rhs, probes)
    report.diagnostics['complementarity'] = complementarity.to_dict()
    if complementarity.min_slack < -config.vi_tol:
        logger.warning('complementarity slack %.3e below -vi_tol', complementarity.min_slack)
    return u, report
