"""
Quasilinear vector fields ``A(x, u, xi)``, their structural envelope and the truncated
fields ``A_n(x, u, xi) = A(x, theta_n(x) u, xi)``.

Every evaluator is vectorized: ``x`` has shape ``(m, d)``, ``u`` shape ``(m,)`` and ``xi``
shape ``(m, d)``; the result has shape ``(m, d)``.
"""
from dataclasses import dataclass, field as dataclass_field
import enum
import logging

import numpy as np

from .errors import ConstructionError, DistanceTooLarge, NonSPDMatrix
from .lorentz import SampledScalarField, dist_to_bounded, weak_norm, truncation_residual
from .profiles import CallableProfile, Profile, ScaledProfile, TruncatedProfile, VectorProfile, ZeroProfile
from .utils import conjugate_exponent


logger = logging.getLogger(__name__)

JACOBIAN_REGULARIZATION = 1e-8
MONOTONICITY_FLOOR = 1e-14
DEFAULT_TRUNCATION_SCHEDULE = tuple(2 ** k for k in range(41))


class StructuralEnvelope:
    """
    Structural data ``(alpha, beta, p, N, b, phi)`` of a field:

    - ``<A, xi> >= alpha |xi|**p - (b |u|)**p - phi**p``
    - ``|A| <= beta |xi|**(p-1) + (b |u|)**(p-1) + phi**(p-1)``
    - ``<A(x,u,xi) - A(x,u,eta), xi - eta> > 0`` for ``xi != eta``

    ``b`` and ``phi`` are nonnegative profiles; :meth:`sample` turns them into sampled fields
    on a mesh.

    ``alpha == beta`` is accepted: the identity-matrix model field has ``alpha = beta = 1``.
    """
    def __init__(self, alpha, beta, p, N, b=None, phi=None):
        if int(N) != N or N < 2:
            raise ConstructionError('structural envelope needs an integer N >= 2')
        if not 1 < p < N:
            raise ConstructionError('structural envelope needs 1 < p < N, got p={} N={}'.format(p, N))
        if not 0 < alpha <= beta:
            raise ConstructionError('structural envelope needs 0 < alpha <= beta, got alpha={} beta={}'.format(alpha, beta))
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.p = float(p)
        self.N = int(N)
        self.b = b if b is not None else ZeroProfile()
        self.phi = phi if phi is not None else ZeroProfile()

    def with_b(self, b):
        return StructuralEnvelope(self.alpha, self.beta, self.p, self.N, b, self.phi)

    def shifted(self, value, gradient):
        """
        Envelope of ``A(x, u + g, xi + grad g)`` for a witness ``g`` given by its vectorized
        ``value`` and ``gradient`` at points.

        The constants follow from Young's inequality and ``|a + c|**s <= 2**(s-1) (|a|**s + |c|**s)``:
        ``alpha / 2**p``, ``max(1, 2**(p-2)) beta`` and ``2 b``; ``phi`` absorbs every term
        carrying ``g`` or ``grad g``. The monotonicity condition is unchanged.
        """
        p = self.p
        growth = max(1.0, 2.0 ** (p - 2))
        young = self.beta * (2 * self.beta / self.alpha) ** (p - 1) / p

        def phi(points):
            b, phi0 = self.coefficient_values(points)
            g = np.abs(np.asarray(value(points), dtype=float).reshape(-1))
            G = np.linalg.norm(np.atleast_2d(gradient(points)), axis=1)
            coercive = (2 * phi0 ** p + (2 * b * g) ** p + (young + 2 / p + self.alpha / 2) * G ** p) ** (1 / p)
            bounded = (phi0 ** (p - 1) + growth * (self.beta * G ** (p - 1) + (b * g) ** (p - 1))) ** (1 / (p - 1))
            return np.maximum(coercive, bounded)

        b = self.b if isinstance(self.b, ZeroProfile) else ScaledProfile(self.b, 2.0)
        return StructuralEnvelope(self.alpha / 2 ** p, growth * self.beta, p, self.N, b,
                                  CallableProfile(phi, 'shifted phi'))

    def coefficient_values(self, x):
        """
        ``(b(x), phi(x))`` at the given points.

        :raises ConstructionError: if either coefficient is negative somewhere.
        """
        b = self.b(x)
        phi = self.phi(x)
        if np.any(b < 0) or np.any(phi < 0):
            raise ConstructionError('structural coefficients b and phi must be nonnegative')
        return b, phi

    def sample(self, mesh, rule=None):
        kwargs = {} if rule is None else {'rule': rule}
        b = mesh.lorentz_sample(self.b, **kwargs)
        phi = mesh.lorentz_sample(self.phi, **kwargs)
        if np.any(b.values < 0) or np.any(phi.values < 0):
            raise ConstructionError('structural coefficients b and phi must be nonnegative')
        return b, phi

    def to_dict(self):
        return {'alpha': self.alpha, 'beta': self.beta, 'p': self.p, 'N': self.N,
                'b': self.b.to_dict(), 'phi': self.phi.to_dict()}


class FieldKind(enum.Enum):
    MODEL = 'model'
    TRUNCATED = 'truncated'
    CUSTOM = 'custom'


class QuasilinearField:
    """
    An evaluatable vector field with its structural envelope.

    :param evaluator: vectorized ``(x, u, xi) -> A``.
    :param envelope: :class:`StructuralEnvelope`.
    :param kind: :class:`FieldKind`.
    :param level: truncation level, for truncated fields only.
    :param base: the untruncated field, for truncated fields only.
    :param xi_derivative: vectorized ``(x, u, xi) -> dA/dxi`` of shape ``(m, d, d)``; central
        differences are used when missing.
    """
    def __init__(self, evaluator, envelope, kind=FieldKind.CUSTOM, level=None, base=None, xi_derivative=None):
        if kind is FieldKind.TRUNCATED and (level is None or base is None):
            raise ConstructionError('a truncated field stores its level and its base field')
        self.evaluator = evaluator
        self.envelope = envelope
        self.kind = kind
        self.level = level
        self.base = base
        self.xi_derivative = xi_derivative

    def __call__(self, x, u, xi):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        u = np.asarray(u, dtype=float).reshape(-1)
        return self.evaluator(x, u, xi)

    def jacobian_xi(self, x, u, xi, step=1e-7):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        u = np.asarray(u, dtype=float).reshape(-1)
        if self.xi_derivative is not None:
            return self.xi_derivative(x, u, xi)
        m, d = xi.shape
        jacobian = np.empty((m, d, d))
        for j in range(d):
            h = step * np.maximum(1.0, np.abs(xi[:, j]))
            forward = xi.copy()
            backward = xi.copy()
            forward[:, j] += h
            backward[:, j] -= h
            jacobian[:, :, j] = (self.evaluator(x, u, forward) - self.evaluator(x, u, backward)) / (2 * h[:, None])
        return jacobian

    @property
    def p(self):
        return self.envelope.p

    @property
    def N(self):
        return self.envelope.N


class ModelData:
    """
    Data of the model operator ``<H xi, xi>**((p-2)/2) H xi + B |u|**(p-2) u``.

    :param H: constant symmetric matrix, a scalar profile ``h`` (for ``H = h(x) I``) or a
        vectorized callable ``x -> (m, d, d)``.
    :param B: ``None``, a :class:`~noncoercive.profiles.VectorProfile` or a vectorized
        callable ``x -> (m, d)``.
    :param alpha: lower bound of the eigenvalues of ``H``.
    :param p: exponent.
    """
    def __init__(self, H, B=None, alpha=None, p=2.0):
        self.H = H
        self.B = B
        self.alpha = alpha
        self.p = float(p)
        if not self.p > 1:
            raise ConstructionError('model exponent must exceed 1')
        if isinstance(H, (list, tuple, np.ndarray)):
            H = np.asarray(H, dtype=float)
            if H.ndim != 2 or H.shape[0] != H.shape[1]:
                raise ConstructionError('constant H must be a square matrix')
            if not np.allclose(H, H.T, rtol=0, atol=1e-14 * max(1.0, np.abs(H).max())):
                raise NonSPDMatrix('H is not symmetric')
            self.H = H

    @property
    def has_lower_order(self):
        return self.B is not None

    def matrices(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m, d = x.shape
        if isinstance(self.H, np.ndarray):
            if self.H.shape != (d, d):
                raise ConstructionError('H has shape {} for points of dimension {}'.format(self.H.shape, d))
            return np.broadcast_to(self.H, (m, d, d))
        if isinstance(self.H, Profile):
            return self.H(x)[:, None, None] * np.eye(d)[None, :, :]
        return np.asarray(self.H(x), dtype=float)

    def lower_order(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.B is None:
            return np.zeros_like(x)
        return np.asarray(self.B(x), dtype=float)

    def eigenvalue_bounds(self, x):
        """
        Smallest and largest eigenvalue of ``H`` over the points ``x``.

        :raises NonSPDMatrix: if some ``H(x)`` is not symmetric positive definite.
        """
        H = self.matrices(x)
        if not np.allclose(H, np.swapaxes(H, 1, 2), rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise NonSPDMatrix('H(x) is not symmetric at some sample point')
        eigenvalues = np.linalg.eigvalsh(H)
        low, high = float(eigenvalues.min()), float(eigenvalues.max())
        if low <= 0:
            raise NonSPDMatrix('H(x) has eigenvalue {} <= 0'.format(low))
        return low, high

    def validate(self, x, b_values):
        """
        Checks ellipticity against ``alpha`` and ``|B| <= b**(p-1)`` at the points ``x``.
        """
        low, _ = self.eigenvalue_bounds(x)
        if self.alpha is not None and low < self.alpha * (1 - 1e-12):
            raise ConstructionError('smallest eigenvalue {} of H is below alpha = {}'.format(low, self.alpha))
        if self.B is not None:
            magnitude = np.linalg.norm(self.lower_order(x), axis=1)
            bound = np.asarray(b_values) ** (self.p - 1)
            excess = magnitude > bound * (1 + 1e-12) + 1e-300
            if np.any(excess):
                index = int(np.flatnonzero(excess)[0])
                raise ConstructionError('|B(x)| = {} exceeds b(x)^(p-1) = {} at sample {}'.format(
                    magnitude[index], bound[index], index))

    def to_dict(self):
        if isinstance(self.H, np.ndarray):
            H = self.H.tolist()
        elif isinstance(self.H, Profile):
            H = {'profile': self.H.to_dict()}
        else:
            raise TypeError('H given as a Python callable cannot be serialized')
        B = None
        if self.B is not None:
            if not isinstance(self.B, VectorProfile):
                raise TypeError('B given as a Python callable cannot be serialized')
            B = self.B.to_dict()
        return {'H': H, 'B': B, 'alpha': self.alpha, 'p': self.p}


def eval_model(data, x, u, xi):
    """
    Evaluates ``<H xi, xi>**((p-2)/2) H xi + B |u|**(p-2) u``.

    The principal part is 0 at ``xi = 0`` for every ``p``.

    :raises NonSPDMatrix: if ``<H xi, xi> < 0`` at some point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    u = np.asarray(u, dtype=float).reshape(-1)
    p = data.p
    H = data.matrices(x)
    H_xi = np.einsum('mij,mj->mi', H, xi)
    quadratic = np.einsum('mi,mi->m', H_xi, xi)
    scale = np.abs(H).max() * np.einsum('mi,mi->m', xi, xi)
    if np.any(quadratic < -1e-14 * np.maximum(scale, 1e-300)):
        raise NonSPDMatrix('<H xi, xi> = {} < 0'.format(float(quadratic.min())))
    quadratic = np.maximum(quadratic, 0.0)
    positive = quadratic > 0
    weight = np.zeros_like(quadratic)
    weight[positive] = quadratic[positive] ** ((p - 2) / 2)
    principal = weight[:, None] * H_xi
    if not data.has_lower_order:
        return principal
    return principal + data.lower_order(x) * (np.sign(u) * np.abs(u) ** (p - 1))[:, None]


def model_xi_derivative(data, x, u, xi):
    """
    ``dA/dxi = q**s H + 2 s q**(s-1) (H xi)(H xi)^T`` with ``s = (p-2)/2`` and
    ``q = <H xi, xi> + delta**2``.
    """
    p = data.p
    H = data.matrices(x)
    H_xi = np.einsum('mij,mj->mi', H, xi)
    quadratic = np.maximum(np.einsum('mi,mi->m', H_xi, xi), 0.0) + JACOBIAN_REGULARIZATION ** 2
    s = (p - 2) / 2
    return quadratic[:, None, None] ** s * H + 2 * s * (quadratic ** (s - 1))[:, None, None] * np.einsum('mi,mj->mij', H_xi, H_xi)


@dataclass
class EnvelopeFactors:
    """
    How the envelope of a model field was derived.
    """
    lambda_min: float
    lambda_max: float
    alpha: float
    beta: float
    beta_factor: float
    young_correction: float

    def to_dict(self):
        return dict(self.__dict__)


def model_envelope(data, points, b=None, phi=None, N=None):
    """
    Structural envelope of the model field from the eigenvalue bounds of ``H`` on ``points``.

    ``alpha = lambda_min**(p/2)``, lowered by ``(1/p')**(p-1) / p`` when a lower-order term is
    present (Young splitting of ``|B| |u|**(p-1) |xi|`` against ``(b |u|)**p``).
    ``beta = lambda_max**(p/2)`` for every ``p``, since ``<H xi, xi> >= |H xi|**2 / lambda_max``;
    the factor multiplying ``lambda_max`` is recorded.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    p = data.p
    low, high = data.eigenvalue_bounds(points)
    correction = conjugate_exponent(p) ** (1 - p) / p if data.has_lower_order else 0.0
    alpha = low ** (p / 2) - correction
    if alpha <= 0:
        raise ConstructionError('ellipticity {} of H is too weak to absorb the lower-order term (alpha = {})'.format(low, alpha))
    beta = high ** (p / 2)
    if N is None:
        N = points.shape[1]
    envelope = StructuralEnvelope(alpha, beta, p, N, b, phi)
    return envelope, EnvelopeFactors(low, high, alpha, beta, beta / high, correction)


def model_field(data, b=None, phi=None, points=None, N=None):
    """
    The model field as a :class:`QuasilinearField` with analytic ``xi``-derivative.

    :param b: nonnegative profile bounding ``|B|**(1/(p-1))``; required with a lower-order term.
    :param points: sample points for the eigenvalue bounds; required unless ``H`` is constant.
    """
    if points is None:
        if not isinstance(data.H, np.ndarray):
            raise ConstructionError('model field with variable H needs sample points')
        points = np.zeros((1, data.H.shape[0]))
    if data.has_lower_order and b is None:
        raise ConstructionError('model field with a lower-order term needs the coefficient b')
    envelope, factors = model_envelope(data, points, b, phi, N)
    data.validate(points, envelope.b(points))
    field = QuasilinearField(lambda x, u, xi: eval_model(data, x, u, xi), envelope, FieldKind.MODEL,
                             xi_derivative=lambda x, u, xi: model_xi_derivative(data, x, u, xi))
    field.model_data = data
    field.envelope_factors = factors
    return field


def with_source(field, phi):
    """
    ``A(x, u, xi) + phi(x)**(p-1) x/|x|`` for a nonnegative profile ``phi``.

    The added term does not depend on ``xi``, so monotonicity and the ``xi``-derivative are
    unchanged. Young's inequality moves it into the envelope: ``alpha`` halves and the new
    ``phi`` bounds both the old one and ``phi`` itself.
    """
    envelope = field.envelope
    p = envelope.p
    source = VectorProfile(CallableProfile(lambda x: phi(x) ** (p - 1), 'source'))
    young = (p * envelope.alpha / 2) ** (-conjugate_exponent(p) / p) / conjugate_exponent(p)

    def evaluator(x, u, xi):
        return field.evaluator(x, u, xi) + source(x)

    def bound(points):
        _, phi0 = envelope.coefficient_values(points)
        extra = np.asarray(phi(points), dtype=float)
        if np.any(extra < 0):
            raise ConstructionError('source profile must be nonnegative')
        coercive = (phi0 ** p + young * extra ** p) ** (1 / p)
        bounded = (phi0 ** (p - 1) + extra ** (p - 1)) ** (1 / (p - 1))
        return np.maximum(coercive, bounded)

    sourced = StructuralEnvelope(envelope.alpha / 2, envelope.beta, p, envelope.N, envelope.b,
                                 CallableProfile(bound, 'source phi'))
    return QuasilinearField(evaluator, sourced, FieldKind.CUSTOM, xi_derivative=field.jacobian_xi)


@dataclass
class StructuralViolation:
    condition: str
    index: int
    lhs: float
    rhs: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class StructuralReport:
    samples: int
    coercivity: bool = True
    growth_given_beta: bool = True
    growth_effective_beta: bool = True
    monotonicity: bool = True
    skipped_monotonicity: int = 0
    given_beta: float = None
    effective_beta: float = None
    first_violation: StructuralViolation = None
    violations: dict = dataclass_field(default_factory=dict)

    @property
    def passed(self):
        return self.coercivity and self.growth_given_beta and self.monotonicity

    @property
    def holds_with_inflated_beta(self):
        return self.coercivity and self.monotonicity and not self.growth_given_beta

    def to_dict(self):
        d = dict(self.__dict__)
        d['first_violation'] = self.first_violation.to_dict() if self.first_violation is not None else None
        d['passed'] = self.passed
        return d


def verify_structural(field, x, u, xi, eta, rtol=1e-12):
    """
    Checks the coercivity, growth and monotonicity conditions of ``field`` on samples.

    Monotonicity is skipped where ``xi == eta``. The growth condition is reported against the
    envelope's ``beta`` and, separately, against the smallest ``beta`` that makes it hold on
    the samples.

    :returns: :class:`StructuralReport`; violations are report entries, never exceptions.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    u = np.asarray(u, dtype=float).reshape(-1)
    if len(u) == 0:
        raise ValueError('verify_structural needs at least one sample')
    envelope = field.envelope
    p = envelope.p
    b, phi = envelope.coefficient_values(x)
    report = StructuralReport(len(u), given_beta=envelope.beta)

    def flag(condition, mask, lhs, rhs):
        if np.any(mask):
            index = int(np.flatnonzero(mask)[0])
            report.violations[condition] = int(np.count_nonzero(mask))
            violation = StructuralViolation(condition, index, float(lhs[index]), float(rhs[index]))
            if report.first_violation is None:
                report.first_violation = violation
            logger.debug('structural %s violated at sample %d: %r vs %r', condition, index, violation.lhs, violation.rhs)
            return False
        return True

    A = field(x, u, xi)
    xi_norm = np.linalg.norm(xi, axis=1)
    lower = (b * np.abs(u))
    with np.errstate(invalid='ignore'):
        pairing = np.einsum('mi,mi->m', A, xi)
        coercive_rhs = envelope.alpha * xi_norm ** p - lower ** p - phi ** p
        slack = rtol * (np.abs(pairing) + np.abs(coercive_rhs))
        report.coercivity = flag('coercivity', pairing < coercive_rhs - slack, pairing, coercive_rhs)

        A_norm = np.linalg.norm(A, axis=1)
        extra = lower ** (p - 1) + phi ** (p - 1)
        growth_rhs = envelope.beta * xi_norm ** (p - 1) + extra
        report.growth_given_beta = flag('growth', A_norm > growth_rhs * (1 + rtol), A_norm, growth_rhs)
        needs = xi_norm > 0
        effective = np.zeros_like(A_norm)
        effective[needs] = (A_norm[needs] - extra[needs]) / xi_norm[needs] ** (p - 1)
        report.effective_beta = float(max(effective.max(initial=0.0), 0.0))
        report.growth_effective_beta = bool(np.all(A_norm[~needs] <= extra[~needs] * (1 + rtol)))

    distinct = np.any(xi != eta, axis=1)
    report.skipped_monotonicity = int(np.count_nonzero(~distinct))
    B = field(x[distinct], u[distinct], eta[distinct])
    difference = A[distinct] - B
    gap = xi[distinct] - eta[distinct]
    monotone = np.einsum('mi,mi->m', difference, gap)
    floor = MONOTONICITY_FLOOR * np.maximum(1.0, np.linalg.norm(gap, axis=1) * (np.linalg.norm(A[distinct], axis=1) + np.linalg.norm(B, axis=1)))
    full = np.zeros(len(u))
    full[distinct] = monotone
    mask = np.zeros(len(u), dtype=bool)
    mask[distinct] = monotone <= -floor
    report.monotonicity = flag('monotonicity', mask, full, np.zeros(len(u)))
    return report


def random_samples(dimension, count, rng, scale=1.0, radius=1.0):
    """
    Random ``(x, u, xi, eta)`` samples with ``x`` in the ball of the given radius.
    """
    directions = rng.normal(size=(count, dimension))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    x = directions * radius * rng.uniform(0.05, 1.0, size=(count, 1))
    u = scale * rng.normal(size=count)
    xi = scale * rng.normal(size=(count, dimension))
    eta = scale * rng.normal(size=(count, dimension))
    return x, u, xi, eta


def _coefficient_values(b, x):
    if isinstance(b, SampledScalarField):
        values = b.values if x is None else b.values[np.asarray(x)]
    elif isinstance(b, Profile) or callable(b):
        values = b(np.atleast_2d(np.asarray(x, dtype=float)))
    else:
        values = np.asarray(b, dtype=float)
    return np.asarray(values, dtype=float)


def theta(b, n, x=None):
    """
    ``theta_n = T_n b / b``: 1 where ``b <= n`` (and where ``b = 0``), ``n / b`` elsewhere.

    :param b: a profile (``x`` are then points), a sampled field (``x`` are then sample
        indices, all by default) or plain values.
    """
    if not n > 0:
        raise ValueError('truncation level must be positive')
    values = _coefficient_values(b, x)
    if np.any(values < 0):
        raise ValueError('theta needs a nonnegative coefficient')
    result = np.ones_like(values)
    above = values > n
    result[above] = n / values[above]
    return float(result) if result.ndim == 0 else result


def truncate_field(field, n):
    """
    ``A_n(x, u, xi) = A(x, theta_n(x) u, xi)``, whose envelope carries ``T_n b`` instead of ``b``.
    """
    if not n > 0:
        raise ValueError('truncation level must be positive')
    b = field.envelope.b
    base = field

    def evaluator(x, u, xi):
        return base.evaluator(x, theta(b, n, x) * u, xi)

    def xi_derivative(x, u, xi):
        return base.jacobian_xi(x, theta(b, n, x) * u, xi)

    envelope = field.envelope.with_b(TruncatedProfile(b, n))
    return QuasilinearField(evaluator, envelope, FieldKind.TRUNCATED, level=n, base=field, xi_derivative=xi_derivative)


def choose_truncation_level(b, alpha, p, sobolev, schedule=DEFAULT_TRUNCATION_SCHEDULE, tol=1e-6):
    """
    Smallest level ``m`` on ``schedule`` with ``S ||b - T_m b||_(N,inf) < alpha**(1/p)``.

    The distance condition ``dist(b, L^inf) < alpha**(1/p) / S`` is checked first.

    :param b: sampled coefficient.
    :param sobolev: :class:`~noncoercive.lorentz.SobolevConstant`; its ``N`` is the Lorentz
        exponent.
    :raises DistanceTooLarge: with the measured distance and the threshold.
    """
    N = sobolev.N
    target = alpha ** (1.0 / p)
    threshold = target / sobolev.value
    distance = dist_to_bounded(b, N, tol=tol)
    if distance >= threshold:
        raise DistanceTooLarge(distance, threshold, sobolev)
    residual = None
    for m in schedule:
        residual = 0.0 if m >= b.max_abs else weak_norm(truncation_residual(b, m), N)
        if sobolev.value * residual < target:
            logger.info('truncation level m=%s: S*||b - T_m b|| = %.6g < alpha^(1/p) = %.6g (S=%.6g, %s)',
                        m, sobolev.value * residual, target, sobolev.value, sobolev.provenance.value)
            return m
    raise DistanceTooLarge(residual, threshold, sobolev,
                           message='distance condition: no truncation level on the schedule reaches '
                                   'S*||b - T_m b||_(N,inf) < alpha^(1/p); last residual {:.6g}, '
                                   'threshold {:.6g} (S = {:.6g}, {})'.format(residual, threshold, sobolev.value,
                                                                               sobolev.provenance.value))
