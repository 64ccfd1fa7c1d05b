"""Generate the test operators: 2D variable-coefficient diffusion discretized
by 5-point finite differences on the unit square, and P1 finite elements on
triangular meshes.

In this file:

class CoefficientField, the diffusion coefficient (scalar or tensor).
class GridGeometry, the cell layout of a finite difference problem, used to
    draw aggregate maps.

functions:
    gen_fd_diffusion:
        the n^2 x n^2 finite difference matrix, unknown (i, j) stored at
        k = i + n * j (x index fastest).
    assemble_p1:
        the P1 stiffness matrix on the non-Dirichlet vertices of a mesh.
    is_spd:
        the SPD check used on every generated matrix.
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from linalg_util.sparse_util import DENSE_CAP, NumericalError

logger = logging.getLogger(__name__)

FIELD_KINDS = ('constant', 'anisotropic', 'jump', 'random', 'rotated')
DEGENERATE_AREA = 1e-14
# P1 entries below this fraction of the largest entry are cancellation noise.
ASSEMBLY_DROP_TOL = 1e-14


class ProblemError(NumericalError, ValueError):
    """Raise when a test problem cannot be generated."""
    module = 'problems'


@dataclass(frozen=True)
class CoefficientField(object):
    """The coefficient a(x, y) of -div(a grad u) = f.

    kind is one of:
        constant     a = value
        anisotropic  a = value * diag(epsilon, 1) if axis is 'x',
                     value * diag(1, epsilon) if axis is 'y'
        jump         a = jump_value for x > 1/2 and y > 1/2, value elsewhere
        random       a = 0.1 + eta, eta uniform on [0, 1], drawn per grid node
                     (finite differences) or per triangle (finite elements)
                     from numpy's PCG64 generator seeded with seed
        rotated      a = R(theta) diag(1, epsilon) R(theta)'
    """
    kind: str = 'constant'
    value: float = 1.0
    epsilon: float = 1.0
    axis: str = 'x'
    jump_value: float = 3.0
    theta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ProblemError('unknown coefficient kind "%s"' % self.kind)
        if not self.epsilon > 0:
            raise ProblemError('epsilon must be positive, got %g' %
                               self.epsilon)
        if not self.value > 0 or not self.jump_value > 0:
            raise ProblemError('coefficient values must be positive')
        if self.axis not in ('x', 'y'):
            raise ProblemError('axis must be "x" or "y", got "%s"' %
                               self.axis)
        if not 0 <= self.theta < np.pi:
            raise ProblemError('theta must lie in [0, pi), got %g' %
                               self.theta)

    @classmethod
    def constant(cls, value=1.0):
        return cls('constant', value=value)

    @classmethod
    def anisotropic(cls, epsilon=100.0, axis='x'):
        return cls('anisotropic', epsilon=epsilon, axis=axis)

    @classmethod
    def jump(cls, jump_value=3.0):
        return cls('jump', jump_value=jump_value)

    @classmethod
    def random(cls, seed=0):
        return cls('random', seed=seed)

    @classmethod
    def rotated(cls, theta, epsilon):
        return cls('rotated', theta=theta, epsilon=epsilon)

    def scalar(self, x, y, rng=None):
        """Scalar factor of the coefficient at the points (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == 'jump':
            return np.where((x > 0.5) & (y > 0.5), self.jump_value,
                            self.value)
        if self.kind == 'random':
            if rng is None:
                rng = np.random.default_rng(self.seed)
            return 0.1 + rng.uniform(0.0, 1.0, size=x.shape)
        return np.full(x.shape, self.value)

    def principal(self):
        """The constant 2x2 tensor multiplying the scalar factor."""
        if self.kind == 'anisotropic':
            if self.axis == 'x':
                return np.diag([self.epsilon, 1.0])
            return np.diag([1.0, self.epsilon])
        if self.kind == 'rotated':
            c, s = np.cos(self.theta), np.sin(self.theta)
            rotation = np.array([[c, -s], [s, c]])
            return rotation @ np.diag([1.0, self.epsilon]) @ rotation.T
        return np.eye(2)


@dataclass(frozen=True)
class GridGeometry(object):
    """Cell layout of an n x n finite difference problem on the unit square."""
    n: int

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    def cell_centers(self):
        """(x, y) of every unknown, in matrix order."""
        k = np.arange(self.n * self.n)
        return (k % self.n + 1) * self.h, (k // self.n + 1) * self.h


def gen_fd_diffusion(n, field=None):
    """Assemble the 5-point finite difference diffusion matrix.

    The face coefficient between neighbouring nodes is the arithmetic mean of
    the coefficient at the two nodes (boundary nodes included); there is no
    h^2 scaling, so the constant field gives exactly I x T + T x I with
    T = tridiag(-1, 2, -1).

    Args:
        n: number of interior grid points per direction, n >= 2.
        field: a CoefficientField; rotated tensors need assemble_p1.

    Returns:
        An n^2 x n^2 csr_matrix.
    """
    if field is None:
        field = CoefficientField.constant()
    if n < 2:
        raise ProblemError('grid size must be at least 2, got %d' % n)
    if field.kind == 'rotated':
        raise ProblemError('rotated tensor coefficients need assemble_p1')

    # node values a[i, j] at (i h, j h), i, j = 0 .. n + 1
    t = np.arange(n + 2) / (n + 1.0)
    X, Y = np.meshgrid(t, t, indexing='ij')
    a = field.scalar(X, Y)
    ax = 0.5 * (a[:-1, 1:-1] + a[1:, 1:-1])     # (n + 1, n) x-faces
    ay = 0.5 * (a[1:-1, :-1] + a[1:-1, 1:])     # (n, n + 1) y-faces
    tensor = field.principal()
    ax = tensor[0, 0] * ax
    ay = tensor[1, 1] * ay

    diagonal = ax[:-1, :] + ax[1:, :] + ay[:, :-1] + ay[:, 1:]
    index = np.arange(n * n).reshape((n, n), order='F')
    rows = [index.ravel(order='F')]
    cols = [index.ravel(order='F')]
    vals = [diagonal.ravel(order='F')]
    # couplings between (i, j) and (i + 1, j), then (i, j) and (i, j + 1)
    west, east = index[:-1, :], index[1:, :]
    south, north = index[:, :-1], index[:, 1:]
    x_couplings = -ax[1:-1, :]
    y_couplings = -ay[:, 1:-1]
    for first, second, coupling in ((west, east, x_couplings),
                                    (south, north, y_couplings)):
        rows.extend([first.ravel(order='F'), second.ravel(order='F')])
        cols.extend([second.ravel(order='F'), first.ravel(order='F')])
        vals.extend([coupling.ravel(order='F')] * 2)

    A = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    logger.debug('assembled %s finite difference matrix, n = %d',
                 field.kind, n)
    return A


def element_stiffness(points, tensor):
    """P1 element matrices.

    Args:
        points: (nt, 3, 2) vertex coordinates, counter-clockwise.
        tensor: (nt, 2, 2) coefficient at each centroid.

    Returns:
        (nt, 3, 3) symmetric element matrices.
    """
    x = points[:, :, 0]
    y = points[:, :, 1]
    det = ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) -
           (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    area = 0.5 * det
    bad = np.flatnonzero(area <= DEGENERATE_AREA)
    if bad.size:
        raise ProblemError('degenerate triangle %d (area %.3e)' % (
            bad[0], area[bad[0]]))
    grads = np.empty(points.shape)
    grads[:, 0] = np.stack([y[:, 1] - y[:, 2], x[:, 2] - x[:, 1]], axis=1)
    grads[:, 1] = np.stack([y[:, 2] - y[:, 0], x[:, 0] - x[:, 2]], axis=1)
    grads[:, 2] = np.stack([y[:, 0] - y[:, 1], x[:, 1] - x[:, 0]], axis=1)
    grads /= det[:, None, None]
    Ke = area[:, None, None] * np.einsum(
        'eai,eij,ebj->eab', grads, tensor, grads)
    return 0.5 * (Ke + Ke.transpose(0, 2, 1))


def assemble_p1(mesh, field=None):
    """Assemble the P1 stiffness matrix restricted to the free vertices.

    The coefficient is evaluated at each triangle centroid. Entries that are
    pure cancellation noise (below 1e-14 of the largest entry) are dropped.
    """
    if field is None:
        field = CoefficientField.constant()
    free = np.flatnonzero(~mesh.boundary)
    if free.size == mesh.boundary.size:
        raise ProblemError('mesh has no Dirichlet vertices')
    if free.size == 0:
        raise ProblemError('mesh has no free vertices')

    points = mesh.vertices[mesh.triangles]
    centroids = points.mean(axis=1)
    scalar = field.scalar(centroids[:, 0], centroids[:, 1])
    tensor = scalar[:, None, None] * field.principal()[None, :, :]
    Ke = element_stiffness(points, tensor)

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    nv = mesh.vertices.shape[0]
    K = scipy.sparse.coo_matrix((Ke.ravel(), (rows, cols)),
                                shape=(nv, nv)).tocsr()
    A = K[free][:, free].tocsr()
    A.sum_duplicates()
    if A.nnz:
        A.data[np.abs(A.data) < ASSEMBLY_DROP_TOL * np.max(np.abs(A.data))] = 0
    A.eliminate_zeros()
    A.sort_indices()
    logger.debug('assembled P1 matrix with %d free vertices', free.size)
    return A


def is_spd(A, dense_cap=DENSE_CAP):
    """SPD check: dense Cholesky up to dense_cap rows, the smallest Ritz
    value of a shift-invert Lanczos run otherwise."""
    A = scipy.sparse.csr_matrix(A)
    n = A.shape[0]
    if n <= dense_cap:
        try:
            np.linalg.cholesky(A.toarray())
        except np.linalg.LinAlgError:
            return False
        return True
    try:
        smallest = scipy.sparse.linalg.eigsh(
            A.tocsc(), k=1, sigma=0.0, which='LM',
            return_eigenvectors=False)[0]
    except RuntimeError:
        return False
    return bool(smallest > 0)
