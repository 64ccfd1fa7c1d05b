"""Sparse and dense kernels shared by every part of the coarsening code.

In this file:

functions:
    as_sparse_matrix:
        validate a square operator and return it as canonical CSR (sorted,
        deduplicated indices).
    spmv:
        sparse matrix-vector product with a dimension check.
    galerkin_product:
        the coarse operator P'AP, symmetrized after a symmetry check.
    diagonal_of, l1_jacobi_diagonal:
        the diagonal D of A and the l1-Jacobi smoother diagonal M.
    dense_cholesky_solve:
        exact solve with a small dense SPD matrix.
    is_positive_semidefinite:
        PSD test by dense eigenvalues, or by the inertia of a sparse LDL'
        factorization when the matrix is too large for the dense path.

class NumericalError, the base class for every error raised by the numerical
modules.
"""
import logging

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

logger = logging.getLogger(__name__)

# Matrices with at most this many rows go through dense LAPACK routines.
DENSE_CAP = 2000
SYMMETRY_TOL = 1e-14
GALERKIN_SYMMETRY_TOL = 1e-13
PSD_TOL = 1e-10


class NumericalError(Exception):
    """Base class for errors raised by the numerical modules.

    The module attribute names the component that failed, so that callers
    (the command line runner in particular) can tag their messages.
    """
    module = 'sparse-core'


class DimensionMismatchError(NumericalError, ValueError):
    """Raise when operand shapes do not agree."""
    pass


class NotSPDError(NumericalError):
    """Raise when a matrix that must be SPD fails its factorization."""
    pass


class NonPositiveDiagonalError(NumericalError, ValueError):
    """Raise when a diagonal entry that must be positive is not."""
    pass


def check_finite(x, name='vector'):
    """Return x as a float ndarray, refusing NaN and Inf entries."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericalError('%s has non-finite entries' % name)
    return x


def max_abs(A):
    """Largest absolute entry of a sparse matrix (0 for an empty one)."""
    if A.nnz == 0:
        return 0.0
    return float(np.max(np.abs(A.data)))


def norm_inf(A):
    """The max row-sum norm, an upper bound for the 2-norm of symmetric A."""
    if A.nnz == 0:
        return 0.0
    return float(np.max(np.asarray(abs(A).sum(axis=1)).ravel()))


def as_sparse_matrix(A, symmetric=True):
    """Return a canonical CSR copy of the square matrix A.

    Args:
        A: anything scipy.sparse.csr_matrix accepts.
        symmetric: when True, require |a_ij - a_ji| <= 1e-14 max|a|.

    Returns:
        A csr_matrix of floats with sorted, deduplicated column indices.
    """
    A = scipy.sparse.csr_matrix(A, dtype=float, copy=True)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(
            'expected a square matrix, got %dx%d' % A.shape)
    A.sum_duplicates()
    A.sort_indices()
    if symmetric and A.nnz:
        asym = max_abs((A - A.T).tocsr())
        if asym > SYMMETRY_TOL * max_abs(A):
            raise NumericalError(
                'matrix is not symmetric (max |a_ij - a_ji| = %.3e)' % asym)
    return A


def spmv(A, x):
    """y = A x. Each row is summed in stored column order."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise DimensionMismatchError(
            'cannot multiply a %dx%d matrix by a vector of shape %s' % (
                A.shape[0], A.shape[1], x.shape))
    return A.dot(x)


def galerkin_product(P, A):
    """Return the coarse operator P'AP.

    The triple product is checked for symmetry to 1e-13 relative and then
    replaced by its symmetric part, so the result is exactly symmetric.
    """
    if P.shape[0] != A.shape[0] or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(
            'cannot form P\'AP with P %dx%d and A %dx%d' % (
                P.shape + A.shape))
    P = scipy.sparse.csr_matrix(P)
    Ac = (P.T @ A @ P).tocsr()
    Ac.sum_duplicates()
    asym = max_abs((Ac - Ac.T).tocsr())
    if asym > GALERKIN_SYMMETRY_TOL * max(max_abs(Ac), 1.0):
        raise NumericalError(
            'Galerkin product is not symmetric (deviation %.3e)' % asym)
    Ac = ((Ac + Ac.T) * 0.5).tocsr()
    Ac.eliminate_zeros()
    Ac.sort_indices()
    return Ac


def diagonal_of(A):
    """The diagonal of A as a 1-d array; every entry must be positive."""
    d = np.asarray(A.diagonal(), dtype=float)
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise NonPositiveDiagonalError(
            'diagonal entry %d is %g; a positive diagonal is required' % (
                bad[0], d[bad[0]]))
    return d


def l1_jacobi_diagonal(A):
    """The l1-Jacobi diagonal m_i = a_ii + sum_{j != i} |a_ij|."""
    diagonal_of(A)
    return np.asarray(abs(A).sum(axis=1)).ravel()


def dense_cholesky_solve(M, b):
    """Solve M x = b for a dense SPD matrix M by Cholesky factorization."""
    M = np.asarray(M, dtype=float)
    b = check_finite(b, 'right-hand side')
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            'cannot solve with a matrix of shape %s and rhs of shape %s' % (
                M.shape, b.shape))
    try:
        factor = scipy.linalg.cho_factor(M)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPDError('matrix is not SPD: %s' % exc)
    return scipy.linalg.cho_solve(factor, b)


def is_positive_semidefinite(A, tol=PSD_TOL, scale=None, dense_cap=DENSE_CAP):
    """Check that the symmetric matrix A is positive semidefinite.

    The smallest eigenvalue may be as low as -tol * scale, where scale
    defaults to the max row-sum norm of A.

    Matrices with at most dense_cap rows use LAPACK. Larger ones are shifted
    by tol * scale and factored without pivoting off the diagonal; by
    Sylvester's law of inertia the shifted matrix is positive definite iff
    every pivot is positive.
    """
    A = scipy.sparse.csr_matrix(A)
    n = A.shape[0]
    if n == 0:
        return True
    if scale is None:
        scale = norm_inf(A)
    threshold = tol * max(scale, np.finfo(float).tiny)
    if n <= dense_cap:
        smallest = scipy.linalg.eigvalsh(
            A.toarray(), subset_by_index=[0, 0])[0]
        return bool(smallest >= -threshold)

    shifted = (A + threshold * scipy.sparse.identity(n)).tocsc()
    try:
        lu = scipy.sparse.linalg.splu(
            shifted, permc_spec='MMD_AT_PLUS_A', diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True, Equil=False))
    except RuntimeError:
        # exactly singular at the shift: an eigenvalue sits at -threshold
        return False
    if np.array_equal(lu.perm_r, lu.perm_c):
        return bool(np.all(lu.U.diagonal() > 0))

    logger.debug('symmetric pivoting was not honoured; using Lanczos')
    smallest = scipy.sparse.linalg.eigsh(
        A, k=1, which='SA', tol=1e-8, return_eigenvectors=False)[0]
    return bool(smallest >= -threshold)
