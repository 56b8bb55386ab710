"""
Closed-form and one-dimensional reference solutions.

Radial functions are given as functions of the radius ``r``; their gradients as functions of
points ``x`` (``u'(r) x / r``).
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect, brentq
from scipy.special import jv

from .errors import OutOfRange
from .profiles import radius_of
from .utils import sobolev_exponent, unit_ball_measure


logger = logging.getLogger(__name__)

FREE_BOUNDARY_TOLERANCE = 1e-10


def _radial_gradient(x, derivative):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = radius_of(x)
    result = np.zeros_like(x)
    positive = r > 0
    result[positive] = (derivative(r[positive]) / r[positive])[:, None] * x[positive]
    return result


def radial_plaplace_profile(r, N, p, f=1.0, radius=1.0):
    """
    Solution of ``-div(|grad u|**(p-2) grad u) = f`` on the ball with ``u = 0`` on the sphere,
    for a constant ``f >= 0``::

        u(r) = (p-1)/p (f/N)**(1/(p-1)) (R**(p/(p-1)) - r**(p/(p-1)))
    """
    r = np.asarray(r, dtype=float)
    q = p / (p - 1)
    return (p - 1) / p * (f / N) ** (1 / (p - 1)) * (radius ** q - r ** q)


def radial_plaplace_gradient(x, N, p, f=1.0):
    return _radial_gradient(x, lambda r: -(f * r / N) ** (1 / (p - 1)))


@dataclass
class FreeBoundary:
    """
    Radial solution of the obstacle problem with a constant obstacle ``psi < 0`` and a constant
    load ``f < 0``: ``u = psi`` on ``r < a`` and ``-div(|grad u|**(p-2) grad u) = f`` on
    ``a < r < R`` with ``u(a) = psi``, ``u'(a) = 0``, ``u(R) = 0``. ``a = 0`` means no contact.
    """
    a: float
    N: int
    p: float
    f: float
    psi: float
    radius: float

    def slope(self, r):
        r = np.asarray(r, dtype=float)
        a = self.a
        out = np.zeros_like(r)
        outside = r > a
        flux = -self.f * (r[outside] ** self.N - a ** self.N) / (self.N * r[outside] ** (self.N - 1))
        out[outside] = np.maximum(flux, 0.0) ** (1 / (self.p - 1))
        return out

    def _scalar_slope(self, s):
        return float(self.slope(np.array([s]))[0])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        values = np.empty(r.shape)
        for index, s in np.ndenumerate(r):
            if self.a > 0 and s <= self.a:
                values[index] = self.psi
            else:
                values[index] = -quad(self._scalar_slope, s, self.radius, epsabs=1e-13, epsrel=1e-12)[0]
        return values

    def gradient(self, x):
        return _radial_gradient(x, self.slope)

    @property
    def contact_measure(self):
        return unit_ball_measure(self.N) * self.a ** self.N

    def to_dict(self):
        return dict(self.__dict__)


def obstacle_free_boundary(N, p, f, psi, radius=1.0, tolerance=FREE_BOUNDARY_TOLERANCE):
    """
    Locates the free boundary of the constant-obstacle problem by bisection on
    ``int_a^R u'(s; a) ds = -psi``.

    :raises OutOfRange: unless ``psi < 0`` and ``f < 0``.
    """
    if not psi < 0 or not f < 0:
        raise OutOfRange('the free-boundary oracle needs psi < 0 and f < 0')

    def depth(a):
        candidate = FreeBoundary(a, N, p, f, psi, radius)
        return quad(candidate._scalar_slope, a, radius, epsabs=1e-14, epsrel=1e-13)[0]

    if depth(0.0) <= -psi:
        logger.info('unconstrained solution stays above the obstacle, no contact')
        return FreeBoundary(0.0, N, p, f, psi, radius)
    a = bisect(lambda a: depth(a) + psi, 0.0, radius, xtol=tolerance)
    return FreeBoundary(a, N, p, f, psi, radius)


def concentration_exponent(N, p):
    if not 1 < p < N:
        raise OutOfRange('the concentration family needs 1 < p < N')
    return 1 - N / p


def concentration_profile(r, n, N, p):
    """
    ``u_n(x) = n**(-g) u_1(n x)`` with ``g = 1 - N/p`` and ``u_1 = 1 - 2**g`` on ``r < 1``,
    ``r**g - 2**g`` on ``1 <= r < 2``, 0 beyond.
    """
    g = concentration_exponent(N, p)
    s = n * np.asarray(r, dtype=float)
    inner = s < 1
    middle = (s >= 1) & (s < 2)
    values = np.zeros(s.shape)
    values[inner] = 1 - 2 ** g
    values[middle] = s[middle] ** g - 2 ** g
    return n ** (-g) * values


def concentration_gradient(x, n, N, p):
    g = concentration_exponent(N, p)

    def derivative(r):
        s = n * r
        out = np.zeros_like(r)
        middle = (s >= 1) & (s < 2)
        out[middle] = n ** (1 - g) * g * s[middle] ** (g - 1)
        return out
    return _radial_gradient(x, derivative)


def concentration_gradient_norm(N, p):
    """
    ``||grad u_n||_p**p = |g|**p N omega_N log 2``, the same for every ``n``.
    """
    g = concentration_exponent(N, p)
    return abs(g) ** p * N * unit_ball_measure(N) * math.log(2)


def concentration_lower_order_norm(N, p):
    """
    ``||(b |u_n|)**(p-1)||_(p')**(p') = int (|u_n| / |x|)**p`` with ``b = 1/|x|``, the same for
    every ``n``.
    """
    g = concentration_exponent(N, p)
    surface = N * unit_ball_measure(N)
    inner = (1 - 2 ** g) ** p / (N - p)
    outer = quad(lambda r: r ** (N - p - 1) * (r ** g - 2 ** g) ** p, 1.0, 2.0, epsabs=1e-14, epsrel=1e-13)[0]
    return surface * (inner + outer)


def adjoint_exponent(gamma, N):
    """
    ``2 - N + gamma``; 0 selects the logarithmic solution.

    :raises OutOfRange: outside ``N/2 < gamma + 1 <= N``.
    """
    if not N / 2 < gamma + 1 <= N:
        raise OutOfRange('gamma={} lies outside N/2 < gamma + 1 <= N for N={}'.format(gamma, N))
    return 2 - N + gamma


def adjoint_solution(r, gamma, N):
    """
    Solution of ``-Laplace v + gamma x/|x|**2 . grad v = 0`` on the unit ball vanishing on the
    sphere: ``(r**e - 1)/e`` with ``e = 2 - N + gamma``, or ``log r`` when ``e = 0``.
    """
    e = adjoint_exponent(gamma, N)
    r = np.asarray(r, dtype=float)
    if e == 0:
        return np.log(r)
    return (r ** e - 1) / e


def adjoint_gradient(x, gamma, N):
    e = adjoint_exponent(gamma, N)
    return _radial_gradient(x, lambda r: r ** (e - 1))


def ball_dirichlet_eigenvalue(N, radius=1.0):
    """
    First Dirichlet eigenvalue of the Laplacian on the ball: ``(j / R)**2`` with ``j`` the first
    positive zero of the Bessel function ``J_(N/2 - 1)``.
    """
    order = N / 2 - 1
    x = 0.1
    while jv(order, x) > 0:
        x += 0.1
    return (brentq(lambda s: jv(order, s), x - 0.1, x, xtol=1e-15) / radius) ** 2


def dist_radial_exact(B, N):
    """
    ``dist_(L^(N,inf))(B/|x|, L^inf) = B omega_N**(1/N)``.
    """
    return B * unit_ball_measure(N) ** (1 / N)


def regularity_exponents(N, p, r):
    """
    Integrability exponents of the regularity bootstrap: starting from ``p*`` each stage ``s``
    gives ``s*``, until ``r`` is reached.

    :returns: list of ``(s, s*, lam)`` with ``lam = s*/p* - 1``; the last stage has ``s = r``.
    :raises OutOfRange: unless ``1 < p < r < N``.
    """
    if not 1 < p < r < N:
        raise OutOfRange('regularity needs 1 < p < r < N, got p={} r={} N={}'.format(p, r, N))
    p_star = sobolev_exponent(N, p)
    stages = []
    s = p_star
    while s < r:
        s_star = sobolev_exponent(N, s)
        stages.append((s, s_star, s_star / p_star - 1))
        s = s_star
    r_star = sobolev_exponent(N, r)
    stages.append((r, r_star, r_star / p_star - 1))
    return stages
