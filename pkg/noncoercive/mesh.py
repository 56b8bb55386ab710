"""
Meshes carrying P1 finite elements.

Both mesh kinds expose the same arrays, so assembly never branches on the kind:

- ``nodes``: node coordinates, shape ``(n, d)``
- ``cells``: node indices per cell, shape ``(C, L)``
- ``quad_points``: shape ``(C, Q, d)``
- ``quad_weights``: shape ``(C, Q)``
- ``basis_values``: P1 basis at the quadrature points, shape ``(C, Q, L)``
- ``grad_basis``: constant P1 gradients per cell, shape ``(C, L, d)``

A radial mesh discretizes a ball of ``R^N`` by its radius ``[0, R]``. Its coordinates live
in ``R^N`` as ``(r, 0, ..., 0)`` and its weights include the surface factor
``N omega_N r**(N-1)``, so fields see genuine ``N``-dimensional points and gradients.
"""
from abc import ABC, abstractmethod
from collections import OrderedDict
import logging
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import Delaunay, cKDTree

from .errors import ConstructionError
from .lorentz import SampledScalarField
from .profiles import radius_of
from .utils import array_checksum, read_csv, unit_ball_measure, write_csv


logger = logging.getLogger(__name__)

MEASURE_RTOL = 1e-10
LOCATE_CACHE_SIZE = 16


class Mesh(ABC):
    kind = None

    def __init__(self, N, nodes, cells, quad_points, quad_weights, basis_values, grad_basis, boundary_nodes):
        self.N = int(N)
        self.nodes = nodes
        self.cells = cells
        self.quad_points = quad_points
        self.quad_weights = quad_weights
        self.basis_values = basis_values
        self.grad_basis = grad_basis
        self.boundary_nodes = np.unique(np.asarray(boundary_nodes, dtype=np.int64))
        free = np.ones(len(nodes), dtype=bool)
        free[self.boundary_nodes] = False
        self.free_mask = free
        self.free_nodes = np.flatnonzero(free)
        for array in (self.nodes, self.cells, self.quad_points, self.quad_weights,
                      self.basis_values, self.grad_basis, self.boundary_nodes, self.free_mask, self.free_nodes):
            array.flags.writeable = False
        self.checksum = array_checksum(self.nodes, self.cells)
        self._locate_cache = OrderedDict()

    @property
    def dimension(self):
        return self.nodes.shape[1]

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def measure(self):
        return math.fsum(self.quad_weights.ravel())

    @property
    def lumped_mass(self):
        return np.bincount(self.cells.ravel(),
                           weights=np.einsum('cq,cql->cl', self.quad_weights, self.basis_values).ravel(),
                           minlength=self.num_nodes)

    def radial_coordinate(self, points):
        return radius_of(points)

    @property
    def node_radius(self):
        return self.radial_coordinate(self.nodes)

    def same_as(self, other):
        return self is other or self.checksum == other.checksum

    def sample(self, function):
        """
        Samples ``function`` (a profile or any vectorized callable of points) at the
        quadrature points.
        """
        points = self.quad_points.reshape(-1, self.dimension)
        return SampledScalarField(points, function(points), self.quad_weights.ravel())

    def lorentz_sample(self, function, rule='quadrature'):
        if rule != 'quadrature':
            raise ValueError('{} meshes only provide the quadrature sampling rule'.format(self.kind))
        return self.sample(function)

    def locate(self, points):
        """
        Finds the cell of every point and the P1 basis values there.

        Results are cached on the xxhash of the point array, since fields are evaluated at
        the same quadrature points over and over during a solve.

        :returns: ``(cell_indices, local_basis_values)`` of shapes ``(m,)`` and ``(m, L)``.
        :raises ValueError: if a point lies outside the mesh.
        """
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        key = array_checksum(points)
        if key in self._locate_cache:
            self._locate_cache.move_to_end(key)
            return self._locate_cache[key]
        cells, local = self._locate(points)
        cells.flags.writeable = False
        local.flags.writeable = False
        self._locate_cache[key] = (cells, local)
        if len(self._locate_cache) > LOCATE_CACHE_SIZE:
            self._locate_cache.popitem(last=False)
        return cells, local

    @abstractmethod
    def _locate(self, points):
        pass

    def evaluate(self, coefficients, points):
        cells, local = self.locate(points)
        return np.einsum('ml,ml->m', local, np.asarray(coefficients)[self.cells[cells]])

    def gradient_at(self, coefficients, points):
        cells, _ = self.locate(points)
        return np.einsum('mld,ml->md', self.grad_basis[cells], np.asarray(coefficients)[self.cells[cells]])

    @property
    @abstractmethod
    def mesh_size(self):
        pass

    @property
    @abstractmethod
    def radius(self):
        pass

    @abstractmethod
    def to_csv(self, vertex_path, cell_path):
        pass

    @staticmethod
    def from_csv(vertex_path, cell_path, N=None):
        """
        Reads a vertex/cell CSV pair. The vertex header tells the kind: ``r`` for a radial
        mesh (``N`` is then required), ``x,y`` for a planar one.
        """
        header, vertices = read_csv(vertex_path)
        _, cells = read_csv(cell_path)
        if header == ['r']:
            if N is None:
                raise ConstructionError('a radial mesh read from CSV needs the dimension N')
            mesh = RadialMesh(N, vertices[:, 0])
            if not np.array_equal(mesh.cells, cells.astype(np.int64)):
                raise ConstructionError('{}: radial cells must join consecutive nodes'.format(cell_path))
            return mesh
        elif header == ['x', 'y']:
            return PlanarMesh(vertices, cells.astype(np.int64))
        raise ConstructionError('{}: unknown vertex header {}'.format(vertex_path, ','.join(header)))


class RadialMesh(Mesh):
    """
    Ball of radius ``nodes[-1]`` in ``R^N`` reduced to its radius.

    The node at ``r = R`` carries the Dirichlet condition, ``r = 0`` is a natural boundary.
    Gauss-Legendre points never touch the cell ends, so integrands singular at the origin
    are never evaluated there.

    :param N: space dimension, at least 2.
    :param nodes: increasing radii starting at 0.
    :param order: Gauss-Legendre points per cell; defaults to ``max(3, ceil(N/2) + 1)``,
        which integrates ``r**(N-1)`` times any quadratic exactly.
    """
    kind = 'radial'

    def __init__(self, N, nodes, order=None):
        if int(N) != N or N < 2:
            raise ConstructionError('radial meshes need an integer dimension N >= 2, got {}'.format(N))
        N = int(N)
        nodes = np.array(nodes, dtype=float).ravel()
        if len(nodes) < 2 or nodes[0] != 0.0:
            raise ConstructionError('radial nodes must start at r = 0 and contain at least one cell')
        if np.any(np.diff(nodes) <= 0):
            raise ConstructionError('radial nodes must be strictly increasing')
        if order is None:
            order = max(3, math.ceil(N / 2) + 1)
        self.order = order
        self.radii = nodes
        self.radii.flags.writeable = False
        self.omega = unit_ball_measure(N)

        inner, outer = nodes[:-1], nodes[1:]
        h = outer - inner
        xi, wi = leggauss(order)
        r = (inner + outer)[:, None] / 2 + h[:, None] / 2 * xi[None, :]
        quad_weights = wi[None, :] * h[:, None] / 2 * N * self.omega * r ** (N - 1)
        C = len(h)

        quad_points = np.zeros((C, order, N))
        quad_points[:, :, 0] = r
        basis_values = np.broadcast_to(np.stack([(1 - xi) / 2, (1 + xi) / 2], axis=1), (C, order, 2)).copy()
        grad_basis = np.zeros((C, 2, N))
        grad_basis[:, 0, 0] = -1 / h
        grad_basis[:, 1, 0] = 1 / h
        cells = np.stack([np.arange(C), np.arange(1, C + 1)], axis=1).astype(np.int64)
        coordinates = np.zeros((C + 1, N))
        coordinates[:, 0] = nodes

        super().__init__(N, coordinates, cells, quad_points, quad_weights, basis_values, grad_basis, [C])

        exact = self.omega * nodes[-1] ** N
        if abs(self.measure - exact) > MEASURE_RTOL * exact:
            raise ConstructionError('radial quadrature gives measure {!r} instead of {!r}'.format(self.measure, exact))

    @classmethod
    def uniform(cls, N, radius=1.0, cells=64, order=None):
        return cls(N, np.linspace(0.0, radius, cells + 1), order)

    @classmethod
    def geometric(cls, N, radius=1.0, cells=64, r_min=1e-9, order=None):
        """
        Nodes ``0, r_min, ..., radius`` with a constant ratio between successive positive
        radii. Resolves functions like ``1/|x|`` over many decades.
        """
        if not 0 < r_min < radius:
            raise ConstructionError('geometric grading needs 0 < r_min < radius')
        if cells < 2:
            raise ConstructionError('geometric grading needs at least two cells')
        positive = r_min * (radius / r_min) ** (np.arange(cells) / (cells - 1))
        positive[-1] = radius
        return cls(N, np.concatenate([[0.0], positive]), order)

    @property
    def radius(self):
        return float(self.radii[-1])

    @property
    def mesh_size(self):
        return float(np.max(np.diff(self.radii)))

    def lorentz_sample(self, function, rule='outer'):
        """
        Samples ``function`` for Lorentz computations.

        The ``'outer'`` rule puts the value at each shell's outer radius on the exact shell
        measure ``omega_N (r_(i+1)**N - r_i**N)``; for radially decreasing functions the
        sampled distribution function is then exact at every node radius.
        """
        if rule == 'quadrature':
            return self.sample(function)
        elif rule != 'outer':
            raise ValueError('unknown sampling rule: ' + rule)
        points = self.nodes[1:]
        weights = self.omega * (self.radii[1:] ** self.N - self.radii[:-1] ** self.N)
        return SampledScalarField(points, function(points), weights, math.fsum(weights))

    def _locate(self, points):
        r = self.radial_coordinate(points)
        if np.any(r > self.radius * (1 + 1e-12)):
            raise ValueError('point outside the ball of radius {}'.format(self.radius))
        cells = np.clip(np.searchsorted(self.radii, r, side='right') - 1, 0, self.num_cells - 1)
        inner, outer = self.radii[cells], self.radii[cells + 1]
        h = outer - inner
        local = np.stack([(outer - r) / h, (r - inner) / h], axis=1)
        return cells.astype(np.int64), local

    def gradient_at(self, coefficients, points):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        derivative = super().gradient_at(coefficients, points)[:, 0]
        r = self.radial_coordinate(points)
        unit = np.zeros((len(points), self.N))
        inside = r > 0
        unit[inside, :points.shape[1]] = points[inside] / r[inside, None]
        unit[~inside, 0] = 1.0
        return derivative[:, None] * unit

    def to_csv(self, vertex_path, cell_path):
        write_csv(vertex_path, ['r'], [self.radii])
        write_csv(cell_path, ['n0', 'n1'], list(self.cells.T))


REFERENCE_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
TRIANGLE_RULE = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


class PlanarMesh(Mesh):
    """
    Triangulation of a planar domain. Boundary nodes are the ends of edges that belong to
    a single triangle.
    """
    kind = 'planar'

    def __init__(self, vertices, triangles):
        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ConstructionError('planar vertices must have shape (n, 2)')
        if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
            raise ConstructionError('triangles must have shape (C, 3) with C >= 1')
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise ConstructionError('triangle refers to a missing vertex')

        jacobians = self._jacobians(vertices, triangles)
        determinants = np.linalg.det(jacobians)
        flipped = determinants < 0
        if np.any(flipped):
            triangles[flipped] = triangles[flipped][:, [0, 2, 1]]
            jacobians = self._jacobians(vertices, triangles)
            determinants = np.linalg.det(jacobians)
        scale = np.max(np.ptp(vertices, axis=0)) ** 2
        if np.any(determinants <= 1e-14 * scale):
            raise ConstructionError('mesh has degenerate triangles: {}'.format(np.flatnonzero(determinants <= 1e-14 * scale)))
        inverse = np.linalg.inv(jacobians)
        self._inverse_jacobians = inverse
        area = determinants / 2

        quad_points = np.einsum('ql,cld->cqd', TRIANGLE_RULE, vertices[triangles])
        quad_weights = np.repeat(area[:, None] / 3, 3, axis=1)
        basis_values = np.broadcast_to(TRIANGLE_RULE, (len(triangles), 3, 3)).copy()
        grad_basis = np.einsum('lk,ckd->cld', REFERENCE_GRADIENTS, inverse)

        edges = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
        unique_edges, counts = np.unique(edges, axis=0, return_counts=True)
        boundary = np.unique(unique_edges[counts == 1])

        super().__init__(2, vertices, triangles, quad_points, quad_weights, basis_values, grad_basis, boundary)
        self._tree = cKDTree(vertices[triangles].mean(axis=1))

    @staticmethod
    def _jacobians(vertices, triangles):
        corners = vertices[triangles]
        return np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=2)

    @classmethod
    def disc(cls, radius=1.0, rings=8):
        """
        Delaunay triangulation of concentric rings: ring ``k`` holds ``6k`` equally spaced
        points at radius ``k * radius / rings``.
        """
        points = [np.zeros((1, 2))]
        for k in range(1, rings + 1):
            angles = 2 * np.pi * np.arange(6 * k) / (6 * k)
            points.append(k * radius / rings * np.stack([np.cos(angles), np.sin(angles)], axis=1))
        points = np.concatenate(points)
        return cls(points, Delaunay(points).simplices)

    @classmethod
    def unit_square(cls, n=8):
        grid = np.linspace(0.0, 1.0, n + 1)
        x, y = np.meshgrid(grid, grid, indexing='xy')
        vertices = np.stack([x.ravel(), y.ravel()], axis=1)
        index = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
        lower_left = index[:-1, :-1].ravel()
        lower_right = index[:-1, 1:].ravel()
        upper_left = index[1:, :-1].ravel()
        upper_right = index[1:, 1:].ravel()
        triangles = np.concatenate([np.stack([lower_left, lower_right, upper_right], axis=1),
                                    np.stack([lower_left, upper_right, upper_left], axis=1)])
        return cls(vertices, triangles)

    @property
    def radius(self):
        return float(np.max(self.node_radius[self.boundary_nodes]))

    @property
    def mesh_size(self):
        corners = self.nodes[self.cells]
        lengths = np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=2)
        return float(np.max(lengths))

    def _barycentric(self, cells, points):
        xi = np.einsum('mij,mj->mi', self._inverse_jacobians[cells], points - self.nodes[self.cells[cells, 0]])
        return np.stack([1 - xi[:, 0] - xi[:, 1], xi[:, 0], xi[:, 1]], axis=1)

    def _locate(self, points):
        m = len(points)
        cells = np.full(m, -1, dtype=np.int64)
        local = np.zeros((m, 3))
        k = min(12, self.num_cells)
        _, candidates = self._tree.query(points, k=k)
        candidates = np.asarray(candidates).reshape(m, k)
        for j in range(k):
            pending = cells < 0
            if not np.any(pending):
                break
            trial = candidates[pending, j]
            bary = self._barycentric(trial, points[pending])
            inside = np.all(bary >= -1e-10, axis=1)
            rows = np.flatnonzero(pending)[inside]
            cells[rows] = trial[inside]
            local[rows] = bary[inside]
        for row in np.flatnonzero(cells < 0):
            bary = self._barycentric(np.arange(self.num_cells), np.repeat(points[row:row + 1], self.num_cells, axis=0))
            inside = np.flatnonzero(np.all(bary >= -1e-10, axis=1))
            if len(inside) == 0:
                raise ValueError('point {} lies outside the mesh'.format(points[row].tolist()))
            cells[row] = inside[0]
            local[row] = bary[inside[0]]
        return cells, local

    def to_csv(self, vertex_path, cell_path):
        write_csv(vertex_path, ['x', 'y'], list(self.nodes.T))
        write_csv(cell_path, ['n0', 'n1', 'n2'], list(self.cells.T))
