"""
Lorentz space quantities of sampled functions.

A :class:`SampledScalarField` carries values on quadrature points together with their
weights, so the distribution function ``t -> |{|f| > t}|`` is a step function of the
sampled magnitudes. Quasi-norms are computed by summing exactly over those steps; the
log-grid quadrature path only serves as a cross-check.
"""
from dataclasses import dataclass
import enum
import logging
import math

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConstructionError, MissingOverride, NonFiniteNorm, ScheduleExhausted
from .utils import read_csv, sobolev_exponent, unit_ball_measure, write_csv


logger = logging.getLogger(__name__)

MEASURE_RTOL = 1e-12


class Infinity(enum.Enum):
    INFINITY = 'inf'

    def __repr__(self):
        return 'INFINITY'


INFINITY = Infinity.INFINITY


class SampledScalarField:
    """
    A scalar function known on weighted sample points.

    :param points: array of shape ``(m, d)`` (or ``(m,)`` for one coordinate).
    :param values: array of shape ``(m,)``.
    :param weights: strictly positive array of shape ``(m,)``.
    :param domain_measure: measure of the domain; defaults to the sum of the weights.

    :raises ConstructionError: on mismatched lengths, nonpositive weights or when the
        weights do not add up to ``domain_measure``.
    """
    def __init__(self, points, values, weights, domain_measure=None):
        points = np.array(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        values = np.array(values, dtype=float).ravel()
        weights = np.array(weights, dtype=float).ravel()

        if len(values) < 1:
            raise ConstructionError('a sampled field needs at least one point')
        if not len(points) == len(values) == len(weights):
            raise ConstructionError('points, values and weights have lengths {}, {}, {}'.format(
                len(points), len(values), len(weights)))
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ConstructionError('quadrature weights must be finite and strictly positive')
        total = math.fsum(weights)
        if domain_measure is None:
            domain_measure = total
        if domain_measure <= 0:
            raise ConstructionError('domain measure must be positive')
        if abs(total - domain_measure) > MEASURE_RTOL * domain_measure:
            raise ConstructionError('weights add up to {!r}, domain measure is {!r}'.format(total, domain_measure))

        for array in (points, values, weights):
            array.flags.writeable = False
        self.points = points
        self.values = values
        self.weights = weights
        self.domain_measure = float(domain_measure)

    def __len__(self):
        return len(self.values)

    def with_values(self, values):
        return SampledScalarField(self.points, values, self.weights, self.domain_measure)

    def abs(self):
        return self.with_values(np.abs(self.values))

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path):
        header = ['x{}'.format(i) for i in range(self.points.shape[1])] + ['value', 'weight']
        columns = list(self.points.T) + [self.values, self.weights]
        write_csv(path, header, columns)

    @staticmethod
    def from_csv(path, domain_measure=None):
        """
        Reads rows ``(coordinates..., value, weight)``.
        """
        header, data = read_csv(path)
        if header[-2:] != ['value', 'weight']:
            raise ConstructionError('{}: last two columns must be value, weight'.format(path))
        return SampledScalarField(data[:, :-2], data[:, -2], data[:, -1], domain_measure)


@dataclass(frozen=True)
class LorentzIndex:
    p: float
    q: object = None

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, 'q', self.p)
        if not self.p > 1:
            raise ConstructionError('Lorentz index needs p > 1, got {}'.format(self.p))
        if self.q is not INFINITY:
            if isinstance(self.q, float) and math.isinf(self.q):
                raise ConstructionError('use INFINITY for q = infinity, not a float')
            if not self.q >= 1:
                raise ConstructionError('Lorentz index needs q >= 1, got {}'.format(self.q))

    @property
    def is_weak(self):
        return self.q is INFINITY

    def to_dict(self):
        return {'p': self.p, 'q': 'inf' if self.is_weak else self.q}

    @staticmethod
    def from_dict(d):
        q = d.get('q', d['p'])
        return LorentzIndex(d['p'], INFINITY if q in ('inf', 'infinity') else q)


class Provenance(enum.Enum):
    USER_OVERRIDE = 'user_override'
    DISCRETE_ESTIMATE = 'discrete_estimate'


@dataclass(frozen=True)
class SobolevConstant:
    """
    Constant of the embedding ``||g||_(p*,q) <= S ||grad g||_(p,q)`` together with where
    its value came from.
    """
    N: int
    p: float
    value: float
    provenance: Provenance
    q: float = None

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, 'q', self.p)
        if int(self.N) != self.N or self.N < 2:
            raise ConstructionError('N must be an integer >= 2')
        if not 1 < self.p < self.N:
            raise ConstructionError('Sobolev constant needs 1 < p < N')
        if not self.value > 0:
            raise ConstructionError('Sobolev constant must be positive')

    @property
    def p_star(self):
        return sobolev_exponent(self.N, self.p)

    @property
    def omega_N(self):
        return unit_ball_measure(self.N)

    def to_dict(self):
        return {'N': self.N, 'p': self.p, 'value': self.value, 'provenance': self.provenance.value, 'q': self.q}

    @staticmethod
    def from_dict(d):
        return SobolevConstant(d['N'], d['p'], d['value'], Provenance(d['provenance']), d.get('q'))


def _steps(f):
    """
    Distinct positive magnitudes in decreasing order and, for each, the weight of the
    samples with magnitude at least that large.
    """
    magnitudes = np.abs(f.values)
    order = np.argsort(-magnitudes, kind='stable')
    sorted_magnitudes = magnitudes[order]
    cumulative = np.cumsum(f.weights[order])
    last_of_run = np.ones(len(sorted_magnitudes), dtype=bool)
    last_of_run[:-1] = sorted_magnitudes[:-1] != sorted_magnitudes[1:]
    levels = sorted_magnitudes[last_of_run]
    measures = cumulative[last_of_run]
    positive = levels > 0
    return levels[positive], measures[positive]


def distribution_function(f, t):
    """
    Measure of the strict superlevel set ``{|f| > t}``.

    Accepts a scalar ``t`` or an array of levels.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError('distribution function needs t >= 0')
    magnitudes = np.abs(f.values)
    order = np.argsort(magnitudes, kind='stable')
    sorted_magnitudes = magnitudes[order]
    tail = np.concatenate([np.cumsum(f.weights[order][::-1])[::-1], [0.0]])
    result = tail[np.searchsorted(sorted_magnitudes, t, side='right')]
    return float(result) if result.ndim == 0 else result


def distribution_curve(f, p, t=None):
    """
    Returns the arrays ``(t, lambda_f(t), t * lambda_f(t)**(1/p))``.

    By default ``t`` runs over the distinct sampled magnitudes.
    """
    if t is None:
        levels, _ = _steps(f)
        t = levels[::-1]
    t = np.asarray(t, dtype=float)
    measures = np.atleast_1d(distribution_function(f, t))
    return t, measures, t * measures ** (1.0 / p)


def export_distribution_curve(f, p, path, t=None):
    t, measures, scaled = distribution_curve(f, p, t)
    write_csv(path, ['t', 'lambda', 't_lambda_1_p'], [t, measures, scaled])


def lorentz_quasinorm(f, idx, method='exact', grid_points=4096, max_refinements=6, rtol=1e-3):
    """
    Computes ``||f||_(p,q)``.

    With ``levels`` ``s_1 > ... > s_m > s_(m+1) = 0`` the distinct sampled magnitudes and
    ``W_j`` the weight of ``{|f| >= s_j}``, the finite ``q`` norm is
    ``(p * sum_j W_j**(q/p) (s_j**q - s_(j+1)**q) / q)**(1/q)`` and the weak norm is
    ``max_j s_j W_j**(1/p)``.

    :param method: ``'exact'`` (step summation) or ``'quadrature'`` (composite trapezoid on
        a logarithmic t-grid, refined until two successive values agree within ``rtol``).

    :raises NonFiniteNorm: if a sampled value is not finite, if the sum overflows, or if the
        quadrature estimate keeps growing past ``max_refinements``.
    """
    if not np.all(np.isfinite(f.values)):
        raise NonFiniteNorm('sampled field has non-finite values')
    if method == 'exact':
        value = _exact_quasinorm(f, idx)
    elif method == 'quadrature':
        value = _quadrature_quasinorm(f, idx, grid_points, max_refinements, rtol)
    else:
        raise ValueError('unknown method: ' + str(method))
    if not math.isfinite(value):
        raise NonFiniteNorm('Lorentz quasi-norm overflowed for index {}'.format(idx.to_dict()))
    return value


def _exact_quasinorm(f, idx):
    levels, measures = _steps(f)
    if len(levels) == 0:
        return 0.0
    p = idx.p
    if idx.is_weak:
        return float(np.max(levels * measures ** (1.0 / p)))
    q = idx.q
    with np.errstate(over='ignore'):
        scale = levels[0]
        normalized = levels / scale
        lower = np.concatenate([normalized[1:], [0.0]])
        total = p / q * math.fsum(measures ** (q / p) * (normalized ** q - lower ** q))
        return float(scale * total ** (1.0 / q))


def _quadrature_quasinorm(f, idx, grid_points, max_refinements, rtol):
    levels, measures = _steps(f)
    if len(levels) == 0:
        return 0.0
    p = idx.p
    s_min, s_max = levels[-1], levels[0]
    previous = None
    for refinement in range(max_refinements + 1):
        n = grid_points * 2 ** refinement
        if s_max > s_min:
            t = np.logspace(math.log10(s_min), math.log10(s_max), n)
        else:
            t = np.array([s_min])
        measure_t = distribution_function(f, np.nextafter(t, 0))
        if idx.is_weak:
            value = float(np.max(t * np.atleast_1d(measure_t) ** (1.0 / p)))
        else:
            q = idx.q
            integrand = p * np.atleast_1d(measure_t) ** (q / p) * t ** (q - 1)
            head = p * measures[-1] ** (q / p) * s_min ** q / q
            body = trapezoid(integrand, t) if len(t) > 1 else 0.0
            value = float((head + body) ** (1.0 / q))
        if previous is not None and abs(value - previous) <= rtol * max(abs(value), np.finfo(float).tiny):
            return value
        previous = value
    raise NonFiniteNorm('quadrature of the Lorentz integral did not settle after {} refinements'.format(max_refinements))


def weak_norm(f, p):
    return lorentz_quasinorm(f, LorentzIndex(p, INFINITY))


def truncate(f, k):
    """
    Pointwise ``T_k f = sign(f) min(|f|, k)``.
    """
    if not k > 0:
        raise ValueError('truncation level must be positive, got {}'.format(k))
    return f.with_values(np.sign(f.values) * np.minimum(np.abs(f.values), k))


def truncation_residual(f, k):
    """
    ``f - T_k f``, computed without cancellation.
    """
    if not k > 0:
        raise ValueError('truncation level must be positive, got {}'.format(k))
    return f.with_values(np.sign(f.values) * np.maximum(np.abs(f.values) - k, 0.0))


def holder_pairing(f, g):
    """
    Weighted integral of ``|f g|`` over common samples.
    """
    if len(f) != len(g) or not np.array_equal(f.weights, g.weights):
        raise ConstructionError('Hölder pairing needs fields on the same samples')
    return math.fsum(f.weights * np.abs(f.values * g.values))


def dist_to_bounded(f, p, tol=1e-6, k0=1.0, max_doublings=200):
    """
    Distance of ``f`` to ``L^inf`` in the weak space ``L^(p,inf)``, as the limit of
    ``||f - T_k f||_(p,inf)`` along the doubling schedule ``k = k0, 2 k0, 4 k0, ...``.

    Returns 0 as soon as ``k`` exceeds the sampled maximum.

    :raises ScheduleExhausted: if successive values still differ by ``tol`` or more after
        ``max_doublings`` doublings.
    """
    if not p > 1:
        raise ValueError('dist_to_bounded needs p > 1')
    top = f.max_abs
    previous = None
    k = k0
    for _ in range(max_doublings + 1):
        if k >= top:
            logger.debug('truncation level %g reaches sampled maximum %g, distance is 0', k, top)
            return 0.0
        value = weak_norm(truncation_residual(f, k), p)
        if previous is not None and abs(previous - value) < tol:
            logger.debug('distance estimate %.10g stabilized at k=%g', value, k)
            return value
        previous = value
        k *= 2
    raise ScheduleExhausted('distance to L^inf did not stabilize within {} doublings'.format(max_doublings),
                            last_value=previous, last_parameter=k / 2)


@dataclass
class ClosureResult:
    in_closure: bool
    inconclusive: bool
    t: np.ndarray
    measures: np.ndarray
    scaled: np.ndarray
    plateau: float = None

    def __bool__(self):
        return self.in_closure

    def to_csv(self, path):
        write_csv(path, ['t', 'lambda', 't_lambda_1_p'], [self.t, self.measures, self.scaled])


def is_in_closure(f, p, tol=1e-3, t0=1.0, plateau_rtol=1e-2, plateau_window=3, max_doublings=200):
    """
    Decides whether ``t lambda_f(t)**(1/p) -> 0`` as ``t`` grows, that is whether ``f`` lies in
    the closure of ``L^inf`` in ``L^(p,inf)``.

    Walks ``t = t0, 2 t0, ...``. The verdict is true once the curve falls below ``tol`` or ``t``
    passes the sampled maximum; it is false once the curve has been flat (relative change at
    most ``plateau_rtol``) over ``plateau_window`` successive doublings above ``tol``.
    """
    if not p > 1:
        raise ValueError('is_in_closure needs p > 1')
    top = f.max_abs
    ts, measures, scaled = [], [], []

    def result(verdict, plateau=None):
        tail = np.diff(scaled[-plateau_window:])
        inconclusive = bool(np.any(tail > 0) and np.any(tail < 0))
        return ClosureResult(verdict, inconclusive, np.array(ts), np.array(measures), np.array(scaled), plateau)

    t = t0
    for _ in range(max_doublings + 1):
        measure = distribution_function(f, t)
        ts.append(t)
        measures.append(measure)
        scaled.append(t * measure ** (1.0 / p))
        if scaled[-1] < tol or t >= top:
            return result(True)
        if len(scaled) > plateau_window:
            window = np.array(scaled[-plateau_window - 1:])
            changes = np.abs(np.diff(window)) / window[1:]
            if np.all(changes <= plateau_rtol):
                return result(False, float(window[-1]))
        t *= 2
    return result(scaled[-1] < tol)


def sobolev_constant(N, p, mesh=None, override=None, q=None, trial_scales=(1.0, 0.5, 0.25, 0.125)):
    """
    Sobolev constant ``S`` of the embedding of ``W^(1,p)_0`` into ``L^(p*,q)``.

    A user ``override`` is returned verbatim. Otherwise, on a given ``mesh``, the constant is
    estimated from below by the largest ratio ``||g||_(p*,q) / ||grad g||_(p,q)`` over radial
    trial profiles interpolated on the mesh: bubbles ``(eps**p' + r**p')**(-(N-p)/p)``
    shifted to vanish at the outer radius, for ``eps`` in ``trial_scales`` times the radius,
    and the polynomials ``1 - (r/R)**2`` and ``(1 - r/R)**2``.

    :raises MissingOverride: if neither a mesh nor an override is given.
    """
    if q is None:
        q = p
    if override is not None:
        return SobolevConstant(N, p, float(override), Provenance.USER_OVERRIDE, q)
    if mesh is None:
        raise MissingOverride('no mesh to estimate the Sobolev constant for N={} p={} and no override given'.format(N, p))

    from .assembly import DiscreteFunction, to_sampled

    p_star = sobolev_exponent(N, p)
    radius = mesh.radius
    p_prime = p / (p - 1)

    def bubble(eps):
        def g(r):
            return (eps ** p_prime + r ** p_prime) ** (-(N - p) / p) - (eps ** p_prime + radius ** p_prime) ** (-(N - p) / p)
        return g

    trials = [bubble(scale * radius) for scale in trial_scales]
    trials.append(lambda r: 1 - (r / radius) ** 2)
    trials.append(lambda r: (1 - r / radius) ** 2)

    best = 0.0
    value_index = LorentzIndex(p_star, q)
    gradient_index = LorentzIndex(p, q)
    for trial in trials:
        g = DiscreteFunction.interpolate(mesh, lambda x: trial(np.minimum(mesh.radial_coordinate(x), radius)))
        numerator = lorentz_quasinorm(to_sampled(g, 'value'), value_index)
        denominator = lorentz_quasinorm(to_sampled(g, 'gradient'), gradient_index)
        if denominator > 0:
            best = max(best, numerator / denominator)
    logger.info('discrete Sobolev constant estimate S=%.6g for N=%d p=%g q=%g on %d nodes', best, N, p, q, mesh.num_nodes)
    return SobolevConstant(N, p, best, Provenance.DISCRETE_ESTIMATE, q)
