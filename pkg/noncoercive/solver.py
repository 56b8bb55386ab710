"""
Frozen-coefficient solves, the fixed-point iteration on the resolvent and the outer loop
over truncation levels.

The resolvent ``F`` maps ``v`` to the solution ``u`` of ``-div A(x, v, grad u) = Phi``; it is
well defined because ``xi -> A(x, v, xi)`` is monotone. A solution of the full problem is
a fixed point of ``F``. When the relaxed iteration ``u <- (1 - w) u + w F(u)`` stalls, the
solver walks the homotopy ``u = t F(u)`` for ``t`` on ``continuation_steps``.
"""
from dataclasses import dataclass, fields as dataclass_fields
import logging
import math

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import (DiscreteFunction, assemble_jacobian, assemble_residual, monotonicity_pairing, norm_w1p,
                       stiffness_matrix)
from .errors import (ConfigError, NewtonStalled, PicardDiverged, SchemeNotCauchy, SingularLinearization,
                     Stagnated)
from .fields import DEFAULT_TRUNCATION_SCHEDULE, choose_truncation_level, truncate_field
from .lorentz import sobolev_constant
from .report import MonitorEntry, SolveReport, StageRecord


logger = logging.getLogger(__name__)

BOUND_GROWTH_LIMIT = 0.05


@dataclass(frozen=True)
class SolveConfig:
    """
    Tolerances and schedules of the solver.

    ``backtrack_factor``, ``armijo`` and ``min_step`` control the damping of Newton steps.
    ``sigma_grid`` defaults to 8 log-spaced levels in ``[1e-3, 1] * max|u|``.
    """
    newton_tol: float = 1e-10
    max_newton: int = 50
    backtrack_factor: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-10
    picard_tol: float = 1e-9
    max_picard: int = 200
    relaxation: float = 1.0
    continuation_steps: tuple = (0.25, 0.5, 0.75, 1.0)
    truncation_schedule: tuple = DEFAULT_TRUNCATION_SCHEDULE
    sigma_grid: tuple = None
    monitor_cap: float = 1e8
    divergence_factor: float = 1e3
    stagnation_window: int = 25
    anderson_depth: int = 0
    vi_tol: float = 1e-8
    max_projection: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ('continuation_steps', 'truncation_schedule', 'sigma_grid'):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        for name in ('newton_tol', 'min_step', 'picard_tol', 'armijo', 'monitor_cap', 'vi_tol'):
            if not getattr(self, name) > 0:
                raise ConfigError('must be positive', key=name)
        for name in ('max_newton', 'max_picard', 'max_projection', 'stagnation_window'):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ConfigError('must be a positive integer', key=name)
        if not 0 < self.backtrack_factor < 1:
            raise ConfigError('must lie in (0, 1)', key='backtrack_factor')
        if not 0 < self.relaxation <= 1:
            raise ConfigError('must lie in (0, 1]', key='relaxation')
        if not self.divergence_factor > 1:
            raise ConfigError('must exceed 1', key='divergence_factor')
        if self.anderson_depth < 0:
            raise ConfigError('must be nonnegative', key='anderson_depth')
        steps = self.continuation_steps
        if len(steps) == 0 or steps[-1] != 1 or any(not 0 < t <= 1 for t in steps) or any(np.diff(steps) <= 0):
            raise ConfigError('must be an increasing grid in (0, 1] ending at 1', key='continuation_steps')
        schedule = self.truncation_schedule
        if len(schedule) == 0 or schedule[0] <= 0 or any(np.diff(schedule) <= 0):
            raise ConfigError('must be strictly increasing and positive', key='truncation_schedule')
        if self.sigma_grid is not None and any(not s > 0 for s in self.sigma_grid):
            raise ConfigError('levels must be positive', key='sigma_grid')

    def to_dict(self):
        d = {}
        for f in dataclass_fields(self):
            value = getattr(self, f.name)
            d[f.name] = list(value) if isinstance(value, tuple) else value
        return d

    @staticmethod
    def from_dict(d):
        known = {f.name for f in dataclass_fields(SolveConfig)}
        for key in d:
            if key not in known:
                raise ConfigError('unknown solver option', key=key)
        return SolveConfig(**d)


def residual_threshold(rhs, config):
    """
    Residuals count as zero below ``newton_tol * max(1, ||load||)``.
    """
    return config.newton_tol * max(1.0, float(np.linalg.norm(rhs.load_vector())))


def _solve_linear(matrix, vector):
    try:
        solution = splu(matrix.tocsc()).solve(vector)
    except RuntimeError as e:
        raise SingularLinearization(str(e))
    if not np.all(np.isfinite(solution)):
        raise SingularLinearization('linearization produced a non-finite step')
    return solution


def laplace_guess(rhs):
    """
    Solution of the Laplace problem with the same right-hand side.
    """
    mesh = rhs.mesh
    load = rhs.load_vector().copy()
    load[mesh.boundary_nodes] = 0.0
    coefficients = _solve_linear(stiffness_matrix(mesh, constrained=True), load)
    coefficients[mesh.boundary_nodes] = 0.0
    return DiscreteFunction(mesh, coefficients)


@dataclass
class NewtonOutcome:
    solution: DiscreteFunction
    iterations: int
    residual: float


def _line_search(residual_of, u, direction, r, config):
    step = 1.0
    while step >= config.min_step:
        trial = u + step * direction
        R = residual_of(trial)
        norm = float(np.linalg.norm(R))
        if math.isfinite(norm) and norm <= (1 - config.armijo * step) * r:
            return trial, R, norm
        step *= config.backtrack_factor
    return None


def _newton(field, v, rhs, config, u0):
    mesh = v.mesh
    threshold = residual_threshold(rhs, config)

    def residual_of(coefficients):
        return assemble_residual(field, v, DiscreteFunction(mesh, coefficients), rhs)

    u = u0.coefficients.copy()
    R = residual_of(u)
    r = float(np.linalg.norm(R))
    iteration = 0
    while r > threshold:
        if iteration >= config.max_newton:
            raise NewtonStalled('Newton stopped at residual {:.3e} after {} iterations'.format(r, iteration))
        iteration += 1
        J = assemble_jacobian(field, v, DiscreteFunction(mesh, u), rhs)
        try:
            direction = _solve_linear(J, -R)
            accepted = _line_search(residual_of, u, direction, r, config)
        except SingularLinearization as e:
            logger.warning('singular linearization (%s), taking a gradient step', e)
            accepted = None
        if accepted is None:
            accepted = _line_search(residual_of, u, -R, r, config)
        if accepted is None:
            raise NewtonStalled('line search failed at residual {:.3e} in iteration {}'.format(r, iteration))
        u, R, r = accepted
        logger.debug('newton %d: residual %.3e', iteration, r)

    if r > 0:
        try:
            polished = u + _solve_linear(assemble_jacobian(field, v, DiscreteFunction(mesh, u), rhs), -R)
            R_polished = residual_of(polished)
            r_polished = float(np.linalg.norm(R_polished))
            if r_polished < r:
                u, r = polished, r_polished
        except SingularLinearization:
            pass
    u[mesh.boundary_nodes] = 0.0
    return NewtonOutcome(DiscreteFunction(mesh, u), iteration, r)


def frozen_solve(field, v, rhs, config=None, u0=None):
    """
    Solves ``-div A(x, v, grad u) = Phi`` by Newton's method with Armijo backtracking on the
    residual norm. Singular linearizations fall back to a gradient step.

    :param u0: starting point; the Laplace solution by default.
    :raises NewtonStalled: if ``max_newton`` iterations or the line search are exhausted.
    """
    config = config or SolveConfig()
    if u0 is None:
        u0 = laplace_guess(rhs)
    return _newton(field, v, rhs, config, u0).solution


def _anderson_step(history_u, history_g, relaxation, depth):
    u_k, g_k = history_u[-1], history_g[-1]
    if depth == 0 or len(history_u) < 2:
        return u_k + relaxation * g_k
    U = np.array(history_u[-depth - 1:])
    G = np.array(history_g[-depth - 1:])
    dU = np.diff(U, axis=0).T
    dG = np.diff(G, axis=0).T
    gamma, *_ = np.linalg.lstsq(dG, g_k, rcond=None)
    return u_k + relaxation * g_k - (dU + relaxation * dG) @ gamma


def _fixed_point(resolvent, consistent, u0, t, config, stage, p):
    """
    Iterates ``u <- (1 - w) u + w t F(u)`` (Anderson-mixed when ``anderson_depth > 0``).

    :returns: ``(u, converged)``; ``converged`` is False on stagnation.
    :raises PicardDiverged: if the norm grows by more than ``divergence_factor``.
    """
    mesh = u0.mesh
    u = u0
    reference = None
    best = math.inf
    since_best = 0
    history_u, history_g = [], []
    for k in range(config.max_picard):
        image = resolvent(u)
        target = image * t
        difference = norm_w1p(target - u, p)
        norm = norm_w1p(target, p)
        stage.picard_history.append(difference)
        stage.norm_history.append(norm)
        logger.debug('fixed point t=%g iteration %d: difference %.3e norm %.6g', t, k, difference, norm)
        if not (math.isfinite(difference) and math.isfinite(norm)):
            raise PicardDiverged('fixed-point iterate became non-finite at t={}'.format(t))
        if difference <= config.picard_tol and (t < 1 or consistent(target)):
            return target, True
        if reference is None and norm > 0:
            reference = norm
        if reference is not None and norm > config.divergence_factor * reference:
            raise PicardDiverged('fixed-point norm grew from {:.6g} to {:.6g} at t={}'.format(reference, norm, t))
        if difference < best * (1 - 1e-3):
            best = difference
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.stagnation_window:
                logger.info('fixed-point iteration stagnated at t=%g with difference %.3e', t, difference)
                return target, False
        history_u.append(u.coefficients)
        history_g.append(target.coefficients - u.coefficients)
        coefficients = _anderson_step(history_u, history_g, config.relaxation, config.anderson_depth)
        coefficients[mesh.boundary_nodes] = 0.0
        u = DiscreteFunction(mesh, coefficients)
    return u, False


def _frozen_map(field, rhs, config, obstacle):
    if obstacle is None or obstacle.is_unconstrained:
        solve = _newton
    else:
        from .obstacle import projected_solve

        def solve(field, v, rhs, config, u0):
            return projected_solve(field, v, rhs, obstacle, config, u0)
    return solve


def _consistency_check(field, rhs, config, obstacle):
    threshold = residual_threshold(rhs, config)
    if obstacle is None or obstacle.is_unconstrained:
        def consistent(u):
            return float(np.linalg.norm(assemble_residual(field, u, u, rhs))) <= threshold
    else:
        from .obstacle import natural_residual

        def consistent(u):
            return float(np.linalg.norm(natural_residual(field, u, u, rhs, obstacle))) <= threshold
    return consistent


def resolvent_fixed_point(field, rhs, config=None, u0=None, obstacle=None, report=None, level=None):
    """
    Finds a fixed point of the resolvent ``F``.

    Runs the relaxed (optionally Anderson-accelerated) iteration at ``t = 1``; if it stalls,
    walks ``u = t F(u)`` along ``config.continuation_steps`` warm-starting each ``t`` from the
    previous one.

    :param obstacle: when given, ``F`` solves the frozen obstacle problem instead.
    :param report: :class:`~noncoercive.report.SolveReport` to append a level record to.
    :returns: ``(u, report)``.
    :raises PicardDiverged: on norm blow-up (``report`` attached).
    :raises Stagnated: if continuation also stalls.
    """
    config = config or SolveConfig()
    mesh = rhs.mesh
    p = field.p
    if report is None:
        report = SolveReport()
    record = report.new_level(level)
    if u0 is None:
        u0 = DiscreteFunction.zeros(mesh)
    solve = _frozen_map(field, rhs, config, obstacle)
    consistent = _consistency_check(field, rhs, config, obstacle)
    stage = None
    warm = {'start': None}

    def resolvent(v):
        start = warm['start'] if warm['start'] is not None else laplace_guess(rhs)
        if obstacle is not None and not obstacle.is_unconstrained:
            start = obstacle.project(start)
        outcome = solve(field, v, rhs, config, start)
        warm['start'] = outcome.solution
        stage.newton_iterations.append(outcome.iterations)
        stage.newton_residuals.append(outcome.residual)
        return outcome.solution

    method = 'anderson' if config.anderson_depth > 0 else 'picard'
    try:
        stage = StageRecord(1.0, method)
        record.stages.append(stage)
        u, converged = _fixed_point(resolvent, consistent, u0, 1.0, config, stage, p)
        stage.converged = converged
        if not converged:
            report.flag('stagnated')
            logger.info('falling back to continuation over t in %s', list(config.continuation_steps))
            report.flag('continuation_used')
            u = u0
            for t in config.continuation_steps:
                stage = StageRecord(t, 'continuation')
                record.stages.append(stage)
                u, converged = _fixed_point(resolvent, consistent, u, t, config, stage, p)
                stage.converged = converged
                if not converged:
                    raise Stagnated('continuation stalled at t={}'.format(t), report)
    except PicardDiverged as e:
        report.flag('blowup_suspected')
        e.report = report
        raise
    record.norm = norm_w1p(u, p)
    report.flag('converged')
    return u, report


def apriori_monitor(u, envelope, sigma_grid=None, cap=1e8):
    """
    For each ``sigma`` computes ``lhs = ||grad u||_p^p`` and ``rhs = ||u||_p^p`` over
    ``{|u| <= sigma}`` (the complement of the strict superlevel set) and
    ``c_est = lhs / (1 + rhs)``; entries above ``cap`` are flagged at risk.
    """
    p = envelope.p
    mesh = u.mesh
    values = np.abs(u.cell_values())
    gradients = np.linalg.norm(u.cell_gradients(), axis=1)[:, None] * np.ones_like(values)
    if sigma_grid is None:
        top = float(values.max()) if values.size else 0.0
        sigma_grid = np.logspace(-3, 0, 8) * (top if top > 0 else 1.0)
    entries = []
    for sigma in sigma_grid:
        if not sigma > 0:
            raise ValueError('monitor levels must be positive')
        below = values <= sigma
        lhs = math.fsum((mesh.quad_weights * gradients ** p)[below])
        rhs = math.fsum((mesh.quad_weights * values ** p)[below])
        c_est = lhs / (1 + rhs)
        entries.append(MonitorEntry(float(sigma), lhs, rhs, c_est, c_est > cap))
    return entries


def truncation_continuation(field, rhs, config=None, sobolev=None, obstacle=None, u0=None, gamma_scales=(1.0,)):
    """
    Solves the truncated problems ``-div A_n(x, u_n, grad u_n) = Phi`` for ``n >= m`` on the
    truncation schedule, warm-starting each level from the previous one.

    ``m`` comes from :func:`~noncoercive.fields.choose_truncation_level` with the given
    Sobolev constant (a discrete estimate on the mesh by default). The loop stops when two
    successive levels differ by less than ``picard_tol`` in ``W^(1,p)`` or when ``n`` exceeds
    the coefficient ``b`` at every quadrature point, past which all levels coincide.

    Between successive levels the pairing ``<A_n(u_n) - A_n(u_prev), grad gamma(u_n - u_prev)>``
    with ``gamma(s) = lam * arctan(s / lam)`` is recorded for every ``lam`` in ``gamma_scales``.

    :returns: ``(u, report)``.
    :raises DistanceTooLarge: if the distance condition fails for this ``S``.
    :raises SchemeNotCauchy: if the schedule ends first.
    """
    config = config or SolveConfig()
    mesh = rhs.mesh
    envelope = field.envelope
    p = envelope.p
    if sobolev is None:
        sobolev = sobolev_constant(envelope.N, p, mesh)
    report = SolveReport(sobolev=sobolev.to_dict())
    b_sampled, _ = envelope.sample(mesh)
    m = choose_truncation_level(b_sampled, envelope.alpha, p, sobolev, config.truncation_schedule)
    report.truncation_level = m
    b_max = mesh.sample(envelope.b).max_abs
    report.diagnostics['b_max'] = b_max

    u = u0
    previous = None
    norms = []
    for n in (n for n in config.truncation_schedule if n >= m):
        logger.info('truncation level n=%s', n)
        field_n = truncate_field(field, n)
        u_n, _ = resolvent_fixed_point(field_n, rhs, config, u0=u, obstacle=obstacle, report=report, level=n)
        record = report.levels[-1]
        norms.append(record.norm)
        record.monitor = apriori_monitor(u_n, envelope, config.sigma_grid, config.monitor_cap)
        if any(entry.at_risk for entry in record.monitor):
            report.flag('boundedness_at_risk')
            logger.warning('boundedness monitor exceeds cap %g at level %s', config.monitor_cap, n)
        if previous is not None:
            record.difference = norm_w1p(u_n - previous, p)
            family = {scale: monotonicity_pairing(field_n, u_n, u_n, previous, scale) for scale in gamma_scales}
            record.gamma_diagnostic = family.get(1.0, next(iter(family.values())))
            report.diagnostics.setdefault('gamma_family', []).extend(
                {'level': n, 'scale': scale, 'value': value} for scale, value in family.items())
            logger.info('level %s: ||u_n - u_prev|| = %.3e', n, record.difference)
        u = u_n
        settled = record.difference is not None and record.difference < config.picard_tol
        if settled or n >= b_max:
            report.diagnostics['truncation_inactive'] = bool(n >= b_max)
            break
        previous = u_n
    else:
        report.flag('converged', False)
        raise SchemeNotCauchy('truncation levels exhausted without two levels agreeing within {}'.format(
            config.picard_tol), report)

    report.uniform_bound = max(norms)
    if len(norms) >= 2:
        earlier = max(norms[:-1])
        report.bound_growth = (report.uniform_bound - earlier) / earlier if earlier > 0 else 0.0
    else:
        report.bound_growth = 0.0
    report.flag('bound_growth_ok', report.bound_growth < BOUND_GROWTH_LIMIT)
    if not report.flags['bound_growth_ok']:
        report.flag('blowup_suspected')
        logger.warning('uniform bound grew by %.1f%% over the last two levels', 100 * report.bound_growth)
    report.flag('converged')
    return u, report
