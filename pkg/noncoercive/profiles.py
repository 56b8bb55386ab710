"""
Named coefficient profiles.

A profile maps an array of points of shape ``(m, d)`` to an array of shape ``(m,)``. Every
named profile round-trips through ``to_dict``/``profile_from_dict`` so that coefficients can
live in run configs.
"""
from abc import ABC, abstractmethod

import numpy as np

from .errors import ConstructionError


def radius_of(points):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        return np.abs(points)
    return np.linalg.norm(points, axis=1)


class Profile(ABC):
    kind = None

    @abstractmethod
    def __call__(self, points):
        pass

    @abstractmethod
    def to_dict(self):
        pass

    def truncated(self, level):
        return TruncatedProfile(self, level)


class ConstantProfile(Profile):
    kind = 'constant'

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, points):
        return np.full(len(np.asarray(points)), self.value)

    def to_dict(self):
        return {'kind': self.kind, 'value': self.value}


class ZeroProfile(ConstantProfile):
    kind = 'zero'

    def __init__(self):
        super().__init__(0.0)

    def to_dict(self):
        return {'kind': self.kind}


class PowerLawProfile(Profile):
    """
    ``amplitude * |x|**exponent``.
    """
    kind = 'power_law'

    def __init__(self, amplitude, exponent):
        self.amplitude = float(amplitude)
        self.exponent = float(exponent)

    def __call__(self, points):
        r = radius_of(points)
        with np.errstate(divide='ignore'):
            return self.amplitude * r ** self.exponent

    def to_dict(self):
        return {'kind': self.kind, 'amplitude': self.amplitude, 'exponent': self.exponent}


class InverseRadiusProfile(PowerLawProfile):
    """
    ``B / |x|``, the critical coefficient of the weak space ``L^(N,inf)``.
    """
    kind = 'inverse_radius'

    def __init__(self, amplitude):
        super().__init__(amplitude, -1.0)

    def to_dict(self):
        return {'kind': self.kind, 'amplitude': self.amplitude}


class TruncatedProfile(Profile):
    kind = 'truncated'

    def __init__(self, base, level):
        if not level > 0:
            raise ConstructionError('truncation level must be positive')
        self.base = base
        self.level = level

    def __call__(self, points):
        values = self.base(points)
        return np.sign(values) * np.minimum(np.abs(values), self.level)

    def to_dict(self):
        return {'kind': self.kind, 'level': self.level, 'base': self.base.to_dict()}


class ScaledProfile(Profile):
    """
    ``factor * base(x)``.
    """
    kind = 'scaled'

    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)

    def __call__(self, points):
        return self.factor * self.base(points)

    def to_dict(self):
        return {'kind': self.kind, 'factor': self.factor, 'base': self.base.to_dict()}


class CallableProfile(Profile):
    """
    Wraps a vectorized callable. Not serializable.
    """
    kind = 'callable'

    def __init__(self, function, name='callable'):
        self.function = function
        self.name = name

    def __call__(self, points):
        return np.asarray(self.function(np.asarray(points, dtype=float)), dtype=float).reshape(-1)

    def to_dict(self):
        raise TypeError('profile {!r} wraps a Python callable and cannot be serialized'.format(self.name))


class VectorProfile:
    """
    Vector coefficient ``magnitude(x) * e(x)`` with ``e`` either the radial direction
    ``x/|x|`` or a fixed unit vector.
    """
    def __init__(self, magnitude, direction='radial'):
        self.magnitude = magnitude
        if isinstance(direction, str):
            if direction != 'radial':
                raise ConstructionError('unknown vector direction: ' + direction)
            self.direction = direction
        else:
            direction = np.asarray(direction, dtype=float)
            norm = np.linalg.norm(direction)
            if norm == 0:
                raise ConstructionError('vector direction must be nonzero')
            self.direction = direction / norm

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        magnitude = self.magnitude(points)
        if isinstance(self.direction, str):
            r = radius_of(points)
            unit = np.zeros_like(points)
            inside = r > 0
            unit[inside] = points[inside] / r[inside, None]
            unit[~inside, 0] = 1.0
        else:
            unit = np.broadcast_to(self.direction, points.shape)
        return magnitude[:, None] * unit

    def to_dict(self):
        direction = self.direction if isinstance(self.direction, str) else self.direction.tolist()
        return {'magnitude': self.magnitude.to_dict(), 'direction': direction}

    @staticmethod
    def from_dict(d):
        return VectorProfile(profile_from_dict(d['magnitude']), d.get('direction', 'radial'))


def profile_from_dict(d):
    """
    Builds a profile from its dict form, e.g. ``{'kind': 'inverse_radius', 'amplitude': 0.1}``.

    A bare number is read as a constant profile.
    """
    if isinstance(d, (int, float)):
        return ConstantProfile(d)
    try:
        kind = d['kind']
        if kind == 'constant':
            return ConstantProfile(d['value'])
        elif kind == 'zero':
            return ZeroProfile()
        elif kind == 'power_law':
            return PowerLawProfile(d.get('amplitude', 1.0), d['exponent'])
        elif kind == 'inverse_radius':
            return InverseRadiusProfile(d.get('amplitude', 1.0))
        elif kind == 'truncated':
            return TruncatedProfile(profile_from_dict(d['base']), d['level'])
        elif kind == 'scaled':
            return ScaledProfile(profile_from_dict(d['base']), d['factor'])
    except (KeyError, TypeError) as e:
        raise ConstructionError('incomplete profile description {!r}: missing {}'.format(d, e))
    raise ConstructionError('unknown profile kind: {!r}'.format(d.get('kind')))
