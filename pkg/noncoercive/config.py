"""
Run configurations.

A run configuration is a JSON document addressed with dotted keys, for example::

    {
      "problem": {
        "mesh": {"kind": "radial", "N": 3, "radius": 1.0, "cells": 64},
        "field": {"kind": "model", "p": 2.0, "H": 1.0,
                  "B": {"magnitude": {"kind": "power_law", "amplitude": 0.05, "exponent": -1.0}},
                  "b": {"kind": "inverse_radius", "amplitude": 0.05}},
        "rhs": {"kind": "load", "f": 1.0},
        "obstacle": {"kind": "constant", "value": -0.05}
      },
      "solver": {"picard_tol": 1e-9},
      "sobolev": {"override": null},
      "output": "results"
    }

``config['problem.mesh.cells']`` reads a value, ``config['solver.seed'] = 1`` writes one.
"""
import json
import logging
import os

import numpy as np

from .assembly import DiscreteFunction, RhsFunctional
from .errors import ConfigError, ConstructionError, NoncoerciveError, NonSPDMatrix
from .fields import ModelData, model_field
from .lorentz import sobolev_constant
from .mesh import Mesh, PlanarMesh, RadialMesh
from .obstacle import Obstacle, shift_obstacle
from .profiles import VectorProfile, profile_from_dict
from .solver import SolveConfig
from .utils import read_csv


logger = logging.getLogger(__name__)

OUTPUT_ENV = 'NONCOERCIVE_OUTPUT'
DEFAULT_OUTPUT = 'results'


def parse_value(text):
    """
    Reads a command line value as JSON, falling back to the plain string.
    """
    try:
        return json.loads(text)
    except ValueError:
        return text


class RunConfig:
    """
    JSON run configuration with dotted-key access.
    """
    def __init__(self, document=None, path=None):
        self.config = document if document is not None else {}
        self.path = path

    @staticmethod
    def load(path):
        """
        :raises ConfigError: with line and column if the file is not valid JSON.
        """
        with open(path, 'r') as f:
            text = f.read()
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError('{}: {}'.format(path, e.msg), line=e.lineno, column=e.colno)
        if not isinstance(document, dict):
            raise ConfigError('{}: top level must be an object'.format(path), line=1, column=1)
        return RunConfig(document, path)

    def save(self, path=None):
        path = path or self.path
        if os.path.dirname(path) and not os.path.exists(os.path.dirname(path)):
            os.makedirs(os.path.dirname(path))
        with open(path, 'w') as f:
            json.dump(self.config, f, indent=2, sort_keys=True)
            f.write('\n')

    def __setitem__(self, key, value):
        keys = key.split('.')
        current = self.config
        for key in keys[:-1]:
            current = current.setdefault(key, {})
            if not isinstance(current, dict):
                raise ConfigError('cannot descend into a value', key=key)
        current[keys[-1]] = value

    def __getitem__(self, key):
        current = self.config
        for part in key.split('.'):
            if not isinstance(current, dict) or part not in current:
                raise KeyError(key)
            current = current[part]
        return current

    def __delitem__(self, key):
        def del_dict_item(d, keys):
            if len(keys) > 1:
                del_dict_item(d[keys[0]], keys[1:])
                if len(d[keys[0]]) == 0:
                    del d[keys[0]]
            else:
                del d[keys[0]]

        del_dict_item(self.config, key.split('.'))

    def __contains__(self, key):
        try:
            self.__getitem__(key)
            return True
        except KeyError:
            return False

    def get(self, key, default=None):
        return self[key] if key in self else default

    def items(self):
        """
        Yields ``(dotted key, value)`` for every leaf, in document order.
        """
        def build_items(d, prefix):
            for key, value in d.items():
                next_prefix = prefix + '.' + key if prefix is not None else key
                if isinstance(value, dict) and value:
                    yield from build_items(value, next_prefix)
                else:
                    yield next_prefix, value
        return build_items(self.config, None)

    def apply_overrides(self, assignments):
        """
        Applies ``key=value`` strings; flags win over the file.
        """
        for assignment in assignments:
            if '=' not in assignment:
                raise ConfigError('override must look like key=value, got {!r}'.format(assignment))
            key, text = assignment.split('=', 1)
            self[key.strip()] = parse_value(text)
            logger.debug('override %s = %r', key.strip(), self[key.strip()])

    def copy(self):
        return RunConfig(json.loads(json.dumps(self.config)), self.path)

    def output_dir(self, flag=None):
        """
        Output root from the flag, the ``output`` key, ``$NONCOERCIVE_OUTPUT`` or ``results``, in that
        order.
        """
        output = flag or self.get('output') or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
        if not isinstance(output, str):
            raise ConfigError('must be a path', key='output')
        return output

    def _section(self, key):
        if key not in self:
            raise ConfigError('missing section', key=key)
        section = self[key]
        if not isinstance(section, dict):
            raise ConfigError('must be an object', key=key)
        return section

    def _build(self, key, builder, *args):
        try:
            return builder(*args)
        except ConfigError:
            raise
        except KeyError as e:
            raise ConfigError('missing entry {}'.format(e), key='{}.{}'.format(key, e.args[0]))
        except (ConstructionError, NonSPDMatrix) as e:
            raise ConfigError(str(e), key=key)
        except NoncoerciveError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), key=key)

    def solve_config(self):
        try:
            return SolveConfig.from_dict(self.get('solver', {}))
        except ConfigError as e:
            raise ConfigError(e.reason, key='solver.' + e.key if e.key else 'solver')
        except TypeError as e:
            raise ConfigError(str(e), key='solver')

    def mesh(self):
        section = self._section('problem.mesh')
        return self._build('problem.mesh', _build_mesh, section, os.path.dirname(self.path or ''))

    def field(self, mesh):
        section = self._section('problem.field')
        return self._build('problem.field', _build_field, section, mesh)

    def rhs(self, mesh):
        section = self._section('problem.rhs')
        return self._build('problem.rhs', _build_rhs, section, mesh)

    def obstacle(self, field, mesh):
        """
        The configured obstacle, or the unconstrained one when ``problem.obstacle`` is absent.

        A ``witness`` profile ``g >= psi`` vanishing on the boundary shifts the problem to the
        nonpositive obstacle ``psi - g``.

        :returns: ``(field, obstacle)``; the field is shifted along with the obstacle.
        """
        section = self.get('problem.obstacle')
        if section is None:
            return field, Obstacle.unconstrained(mesh)
        key = 'problem.obstacle'
        psi = self._build(key, _obstacle_values, section, mesh, os.path.dirname(self.path or ''))
        if section.get('witness') is None:
            return field, self._build(key, Obstacle, mesh, psi)
        witness = self._build(key + '.witness', profile_from_dict, section['witness'])
        g = DiscreteFunction.interpolate(mesh, witness)
        return shift_obstacle(field, psi, g)

    def sobolev(self, field, mesh):
        override = self.get('sobolev.override')
        q = self.get('sobolev.q')
        return sobolev_constant(field.envelope.N, field.envelope.p, mesh, override=override, q=q)


def _resolve(base, path):
    return path if os.path.isabs(path) else os.path.join(base, path)


def _build_mesh(d, base):
    kind = d.get('kind', 'radial')
    if kind == 'radial':
        grading = d.get('grading', 'uniform')
        if grading == 'uniform':
            return RadialMesh.uniform(d['N'], d.get('radius', 1.0), d.get('cells', 64))
        elif grading == 'geometric':
            return RadialMesh.geometric(d['N'], d.get('radius', 1.0), d.get('cells', 64), d.get('r_min', 1e-9))
        raise ConfigError('unknown grading {!r}'.format(grading), key='problem.mesh.grading')
    elif kind == 'disc':
        return PlanarMesh.disc(d.get('radius', 1.0), d.get('rings', 8))
    elif kind == 'square':
        return PlanarMesh.unit_square(d.get('n', 8))
    elif kind == 'csv':
        return Mesh.from_csv(_resolve(base, d['vertices']), _resolve(base, d['cells']), d.get('N'))
    raise ConfigError('unknown mesh kind {!r}'.format(kind), key='problem.mesh.kind')


def _build_field(d, mesh):
    kind = d.get('kind', 'model')
    if kind != 'model':
        raise ConfigError('only model fields can be configured, got {!r}'.format(kind), key='problem.field.kind')
    dimension = mesh.dimension
    H = d.get('H', 1.0)
    if isinstance(H, (int, float)):
        H = float(H) * np.eye(dimension)
    elif isinstance(H, dict):
        H = profile_from_dict(H)
    B = VectorProfile.from_dict(d['B']) if d.get('B') is not None else None
    b = profile_from_dict(d['b']) if d.get('b') is not None else None
    phi = profile_from_dict(d['phi']) if d.get('phi') is not None else None
    data = ModelData(H, B, d.get('alpha'), d.get('p', 2.0))
    points = mesh.quad_points.reshape(-1, dimension)
    return model_field(data, b, phi, points=points, N=mesh.N)


def _build_rhs(d, mesh):
    kind = d.get('kind', 'load')
    if kind == 'load':
        f = d.get('f', 0.0)
        return RhsFunctional.from_load(mesh, f if isinstance(f, (int, float)) else profile_from_dict(f))
    elif kind == 'flux':
        return RhsFunctional.from_flux(mesh, VectorProfile.from_dict(d['F']), d['p'])
    elif kind == 'divergence':
        return RhsFunctional.from_divergence(mesh, VectorProfile.from_dict(d['G']))
    elif kind == 'zero':
        return RhsFunctional.zero(mesh)
    raise ConfigError('unknown right-hand side kind {!r}'.format(kind), key='problem.rhs.kind')


def _obstacle_values(d, mesh, base):
    kind = d.get('kind', 'constant')
    if kind == 'constant':
        return np.full(mesh.num_nodes, float(d['value']))
    elif kind == 'profile':
        return np.asarray(profile_from_dict(d['profile'])(mesh.nodes), dtype=float).reshape(-1)
    elif kind == 'csv':
        path = _resolve(base, d['path'])
        header, data = read_csv(path)
        if header[-1] != 'psi':
            raise ConfigError('{}: last column must be psi'.format(path), key='problem.obstacle.path')
        return data[:, -1]
    elif kind == 'none':
        return np.full(mesh.num_nodes, -np.inf)
    raise ConfigError('unknown obstacle kind {!r}'.format(kind), key='problem.obstacle.kind')
