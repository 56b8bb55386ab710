"""
P1 functions, right-hand sides and assembly of the frozen-coefficient operator.

The residual of ``-div A(x, v, grad u) = Phi`` tested with the hat function ``w_i`` is::

    R_i = int <A(x, v(x), grad u), grad w_i> - <Phi, w_i>

Cell contributions are reduced with ``numpy.bincount`` in cell order, so assembly is
deterministic to the bit for a fixed mesh.
"""
import enum
import logging
import math

import numpy as np
import scipy.sparse as sp

from .errors import ConstructionError, MeshMismatch
from .lorentz import SampledScalarField
from .utils import read_csv, write_csv


logger = logging.getLogger(__name__)


class DiscreteFunction:
    """
    Nodal coefficients of a P1 function on ``mesh``.

    :raises ConstructionError: if ``zero_boundary`` is set and a boundary coefficient is
        nonzero, or if the length does not match the mesh.
    """
    def __init__(self, mesh, coefficients, zero_boundary=True):
        coefficients = np.array(coefficients, dtype=float).ravel()
        if len(coefficients) != mesh.num_nodes:
            raise ConstructionError('{} coefficients for a mesh with {} nodes'.format(len(coefficients), mesh.num_nodes))
        if zero_boundary and np.any(coefficients[mesh.boundary_nodes] != 0):
            raise ConstructionError('function flagged zero_boundary has nonzero boundary values')
        coefficients.flags.writeable = False
        self.mesh = mesh
        self.coefficients = coefficients
        self.zero_boundary = zero_boundary

    @staticmethod
    def zeros(mesh):
        return DiscreteFunction(mesh, np.zeros(mesh.num_nodes))

    @staticmethod
    def interpolate(mesh, function, zero_boundary=True):
        """
        Nodal interpolant of a profile or vectorized callable of points. With
        ``zero_boundary`` the boundary values are set to 0.
        """
        values = np.array(function(mesh.nodes), dtype=float).reshape(-1)
        if zero_boundary:
            values[mesh.boundary_nodes] = 0.0
        return DiscreteFunction(mesh, values, zero_boundary)

    def with_coefficients(self, coefficients, zero_boundary=None):
        if zero_boundary is None:
            zero_boundary = self.zero_boundary
        return DiscreteFunction(self.mesh, coefficients, zero_boundary)

    def cell_values(self):
        """
        Values at the quadrature points, shape ``(C, Q)``.
        """
        return np.einsum('cql,cl->cq', self.mesh.basis_values, self.coefficients[self.mesh.cells])

    def cell_gradients(self):
        """
        Constant gradient per cell, shape ``(C, d)``.
        """
        return np.einsum('cld,cl->cd', self.mesh.grad_basis, self.coefficients[self.mesh.cells])

    def evaluate(self, points):
        return self.mesh.evaluate(self.coefficients, points)

    def gradient(self, points):
        return self.mesh.gradient_at(self.coefficients, points)

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.coefficients)))

    def _check(self, other):
        if not self.mesh.same_as(other.mesh):
            raise MeshMismatch('functions live on different meshes')

    def __add__(self, other):
        self._check(other)
        return DiscreteFunction(self.mesh, self.coefficients + other.coefficients, self.zero_boundary and other.zero_boundary)

    def __sub__(self, other):
        self._check(other)
        return DiscreteFunction(self.mesh, self.coefficients - other.coefficients, self.zero_boundary and other.zero_boundary)

    def __mul__(self, scalar):
        return DiscreteFunction(self.mesh, scalar * self.coefficients, self.zero_boundary)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def to_csv(self, path):
        header = ['x{}'.format(i) for i in range(self.mesh.dimension)] + ['value']
        write_csv(path, header, list(self.mesh.nodes.T) + [self.coefficients])

    @staticmethod
    def from_csv(mesh, path, zero_boundary=True):
        header, data = read_csv(path)
        if header[-1] != 'value' or len(data) != mesh.num_nodes:
            raise ConstructionError('{}: expected {} rows of (coordinates, value)'.format(path, mesh.num_nodes))
        if not np.allclose(data[:, :-1], mesh.nodes, rtol=0, atol=1e-12 * max(1.0, mesh.radius)):
            raise MeshMismatch('{}: node coordinates do not match the mesh'.format(path))
        return DiscreteFunction(mesh, data[:, -1], zero_boundary)


def _point_values(mesh, function, shape):
    points = mesh.quad_points.reshape(-1, mesh.dimension)
    if isinstance(function, (int, float)):
        values = np.full(points.shape[0], float(function))
    else:
        values = np.asarray(function(points), dtype=float)
    return values.reshape(shape)


class RhsKind(enum.Enum):
    LOAD = 'load'
    DIVERGENCE = 'divergence'
    FLUX = 'flux'
    VECTOR = 'vector'
    ZERO = 'zero'


class RhsFunctional:
    """
    Right-hand side ``Phi`` in the dual of ``W^(1,p)_0``.

    Use the constructors: :meth:`from_load` (``<Phi, w> = int f w``), :meth:`from_divergence`
    (``<Phi, w> = int G . grad w``), :meth:`from_flux` (``Phi = div(|F|**(p-2) F)``),
    :meth:`from_vector` (nodal load vector) and :meth:`zero`.
    """
    def __init__(self, mesh, kind, density=None, field=None, vector=None, flux=None, exponent=None):
        self.mesh = mesh
        self.kind = kind
        self.density = density
        self.field = field
        self.flux = flux
        self.exponent = exponent
        if vector is not None:
            vector = np.array(vector, dtype=float).ravel()
            if len(vector) != mesh.num_nodes:
                raise ConstructionError('load vector has {} entries for {} nodes'.format(len(vector), mesh.num_nodes))
            vector.flags.writeable = False
        self._vector = vector

    @staticmethod
    def from_load(mesh, f):
        density = _point_values(mesh, f, mesh.quad_weights.shape)
        return RhsFunctional(mesh, RhsKind.LOAD, density=density)

    @staticmethod
    def from_divergence(mesh, G):
        field = _point_values(mesh, G, mesh.quad_points.shape)
        return RhsFunctional(mesh, RhsKind.DIVERGENCE, field=field)

    @staticmethod
    def from_flux(mesh, F, p):
        """
        ``Phi = div(|F|**(p-2) F)``, tested by parts: ``<Phi, w> = -int |F|**(p-2) F . grad w``.
        """
        flux = _point_values(mesh, F, mesh.quad_points.shape)
        magnitude = np.linalg.norm(flux, axis=2)
        weight = np.zeros_like(magnitude)
        positive = magnitude > 0
        weight[positive] = magnitude[positive] ** (p - 2)
        return RhsFunctional(mesh, RhsKind.FLUX, field=-weight[:, :, None] * flux, flux=flux, exponent=p)

    @staticmethod
    def from_vector(mesh, vector):
        return RhsFunctional(mesh, RhsKind.VECTOR, vector=vector)

    @staticmethod
    def zero(mesh):
        return RhsFunctional(mesh, RhsKind.ZERO, vector=np.zeros(mesh.num_nodes))

    def load_vector(self):
        """
        ``<Phi, w_i>`` for every hat function, boundary nodes included.
        """
        if self._vector is None:
            mesh = self.mesh
            if self.density is not None:
                local = np.einsum('cq,cq,cql->cl', mesh.quad_weights, self.density, mesh.basis_values)
            else:
                local = np.einsum('cq,cqd,cld->cl', mesh.quad_weights, self.field, mesh.grad_basis)
            vector = np.bincount(mesh.cells.ravel(), weights=local.ravel(), minlength=mesh.num_nodes)
            vector.flags.writeable = False
            self._vector = vector
        return self._vector

    def pairing(self, w):
        if not self.mesh.same_as(w.mesh):
            raise MeshMismatch('right-hand side and test function live on different meshes')
        return float(self.load_vector() @ w.coefficients)

    @property
    def is_zero(self):
        return not np.any(self.load_vector())


def _check_meshes(*objects):
    mesh = objects[0].mesh
    for obj in objects[1:]:
        if obj is not None and not mesh.same_as(obj.mesh):
            raise MeshMismatch('{} lives on a different mesh'.format(type(obj).__name__))
    return mesh


def _field_at_quadrature(field, v_frozen, u):
    mesh = u.mesh
    C, Q, d = mesh.quad_points.shape
    points = mesh.quad_points.reshape(-1, d)
    frozen = v_frozen.cell_values().reshape(-1)
    gradients = np.repeat(u.cell_gradients()[:, None, :], Q, axis=1).reshape(-1, d)
    return points, frozen, gradients


def assemble_residual(field, v_frozen, u, rhs):
    """
    Nodal residual of the frozen problem, zero on boundary rows.

    :raises MeshMismatch: if the arguments live on different meshes.
    """
    mesh = _check_meshes(u, v_frozen, rhs)
    C, Q, d = mesh.quad_points.shape
    points, frozen, gradients = _field_at_quadrature(field, v_frozen, u)
    A = field(points, frozen, gradients).reshape(C, Q, d)
    local = np.einsum('cq,cqd,cld->cl', mesh.quad_weights, A, mesh.grad_basis)
    residual = np.bincount(mesh.cells.ravel(), weights=local.ravel(), minlength=mesh.num_nodes)
    residual -= rhs.load_vector()
    residual[mesh.boundary_nodes] = 0.0
    return residual


def _scatter_matrix(mesh, local):
    L = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, L, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, L)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.num_nodes, mesh.num_nodes)).tocsr()


def _constrain(mesh, matrix):
    """
    Replaces boundary rows and columns by the identity.
    """
    keep = sp.diags(mesh.free_mask.astype(float))
    fixed = sp.diags((~mesh.free_mask).astype(float))
    return (keep @ matrix @ keep + fixed).tocsr()


def assemble_jacobian(field, v_frozen, u, rhs=None):
    """
    Jacobian of :func:`assemble_residual` with respect to the coefficients of ``u``, with
    identity rows and columns on the boundary.

    Only ``dA/dxi`` enters since the ``u`` slot of the field is frozen at ``v_frozen``. For the
    model field its weight is regularized by ``delta**2 = 1e-16`` where ``grad u`` vanishes.
    """
    mesh = _check_meshes(u, v_frozen, *(() if rhs is None else (rhs,)))
    C, Q, d = mesh.quad_points.shape
    points, frozen, gradients = _field_at_quadrature(field, v_frozen, u)
    D = field.jacobian_xi(points, frozen, gradients).reshape(C, Q, d, d)
    local = np.einsum('cq,cqij,cki,clj->ckl', mesh.quad_weights, D, mesh.grad_basis, mesh.grad_basis)
    return _constrain(mesh, _scatter_matrix(mesh, local))


def stiffness_matrix(mesh, constrained=False):
    local = np.einsum('cq,cki,cli->ckl', mesh.quad_weights, mesh.grad_basis, mesh.grad_basis)
    matrix = _scatter_matrix(mesh, local)
    return _constrain(mesh, matrix) if constrained else matrix


def mass_matrix(mesh):
    local = np.einsum('cq,cqk,cql->ckl', mesh.quad_weights, mesh.basis_values, mesh.basis_values)
    return _scatter_matrix(mesh, local)


def convection_matrix(mesh, B):
    """
    ``C_ij = int (B . grad w_j) w_i`` for a vectorized vector field ``B`` of points.
    """
    C, Q, d = mesh.quad_points.shape
    values = np.asarray(B(mesh.quad_points.reshape(-1, d)), dtype=float).reshape(C, Q, d)
    local = np.einsum('cq,cqk,cqd,cld->ckl', mesh.quad_weights, mesh.basis_values, values, mesh.grad_basis)
    return _scatter_matrix(mesh, local)


def norm_w1p(u, p):
    """
    ``||grad u||_p`` by cell quadrature.
    """
    gradients = np.linalg.norm(u.cell_gradients(), axis=1)
    weights = u.mesh.quad_weights.sum(axis=1)
    return math.fsum(weights * gradients ** p) ** (1.0 / p)


def lp_norm(u, p):
    values = np.abs(u.cell_values())
    return math.fsum((u.mesh.quad_weights * values ** p).ravel()) ** (1.0 / p)


def gradient_error(u, exact_gradient, p):
    """
    ``||grad u - g||_p`` for a vectorized exact gradient ``g`` of points.
    """
    mesh = u.mesh
    C, Q, d = mesh.quad_points.shape
    exact = np.asarray(exact_gradient(mesh.quad_points.reshape(-1, d)), dtype=float).reshape(C, Q, d)
    difference = np.linalg.norm(u.cell_gradients()[:, None, :] - exact, axis=2)
    return math.fsum((mesh.quad_weights * difference ** p).ravel()) ** (1.0 / p)


def to_sampled(u, quantity='value'):
    """
    Bridge to Lorentz computations: ``|u|`` or ``|grad u|`` on the quadrature points.
    """
    mesh = u.mesh
    if quantity == 'value':
        values = np.abs(u.cell_values())
    elif quantity == 'gradient':
        values = np.repeat(np.linalg.norm(u.cell_gradients(), axis=1)[:, None], mesh.quad_weights.shape[1], axis=1)
    else:
        raise ValueError('unknown quantity: ' + quantity)
    return SampledScalarField(mesh.quad_points.reshape(-1, mesh.dimension), values.ravel(), mesh.quad_weights.ravel())


def weak_form_defect(field, u, rhs, w):
    """
    ``int <A(x, u, grad u), grad w> - <Phi, w>`` for a zero-boundary test function ``w``.
    """
    residual = assemble_residual(field, u, u, rhs)
    return float(residual @ w.coefficients)


def random_test_functions(mesh, count, rng):
    """
    Random zero-boundary P1 functions with coefficients smoothed over neighbouring nodes.
    """
    adjacency = _scatter_matrix(mesh, np.ones((mesh.num_cells,) + (mesh.cells.shape[1],) * 2))
    adjacency.data[:] = 1.0
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    functions = []
    for _ in range(count):
        coefficients = rng.normal(size=mesh.num_nodes)
        coefficients = adjacency @ coefficients / degree
        coefficients[mesh.boundary_nodes] = 0.0
        functions.append(DiscreteFunction(mesh, coefficients))
    return functions


def arctan_family(scale):
    """
    ``gamma(s) = scale * arctan(s / scale)`` and its derivative.
    """
    def gamma(s):
        return scale * np.arctan(s / scale)

    def derivative(s):
        return 1.0 / (1.0 + (s / scale) ** 2)
    return gamma, derivative


def monotonicity_pairing(field, v, u1, u2, scale=1.0):
    """
    ``int <A(x, v, grad u1) - A(x, v, grad u2), grad gamma(u1 - u2)>`` with
    ``gamma(s) = scale * arctan(s / scale)``. Nonnegative for monotone fields.
    """
    mesh = _check_meshes(u1, u2, v)
    C, Q, d = mesh.quad_points.shape
    points, frozen, first = _field_at_quadrature(field, v, u1)
    _, _, second = _field_at_quadrature(field, v, u2)
    difference = (field(points, frozen, first) - field(points, frozen, second)).reshape(C, Q, d)
    gap = u1 - u2
    _, derivative = arctan_family(scale)
    gradient = derivative(gap.cell_values())[:, :, None] * gap.cell_gradients()[:, None, :]
    return math.fsum(np.einsum('cq,cqd,cqd->cq', mesh.quad_weights, difference, gradient).ravel())
