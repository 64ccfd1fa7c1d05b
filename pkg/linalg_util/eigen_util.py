"""Symmetric (generalized) eigenvalue solvers.

The dense path goes through LAPACK; the sparse path uses ARPACK in
generalized mode with A^{-1} applied by a sparse LU factorization, falling
back on LOBPCG when ARPACK breaks down on degenerate operators.
"""
import logging
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from linalg_util.sparse_util import (
    DENSE_CAP, DimensionMismatchError, NotSPDError, NumericalError)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
ARPACK_NCV = 40
ARPACK_MAXITER = 5000


class EigenNonConvergenceError(NumericalError):
    """Raise when an iterative eigensolver stops before converging."""
    pass


def start_vector(n, seed=DEFAULT_SEED):
    """Deterministic start vector for the iterative solvers."""
    return np.random.default_rng(seed).uniform(0.5, 1.5, size=n)


def fix_sign(x):
    """Flip x so that its first entry that is not negligible is positive."""
    x = np.asarray(x, dtype=float)
    big = np.flatnonzero(np.abs(x) > 1e-12 * np.max(np.abs(x), initial=0.0))
    if big.size and x[big[0]] < 0:
        return -x
    return x


def generalized_symmetric_eig(Astiff, Bmass):
    """All eigenpairs of Astiff x = sigma Bmass x.

    Args:
        Astiff: dense symmetric matrix.
        Bmass: dense SPD matrix of the same shape.

    Returns:
        (sigma, X): eigenvalues in ascending order and the Bmass-orthonormal
        eigenvectors as the columns of X.
    """
    a = np.asarray(Astiff, dtype=float)
    b = np.asarray(Bmass, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise DimensionMismatchError(
            'stiffness %s and mass %s shapes differ' % (a.shape, b.shape))
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    try:
        return scipy.linalg.eigh(a, b)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPDError('mass matrix is not SPD: %s' % exc)


def _dense(S, n):
    if scipy.sparse.issparse(S):
        return S.toarray()
    if isinstance(S, np.ndarray):
        return S
    return S @ np.eye(n)


def largest_generalized_eig_sparse(S, A, tol=1e-8, seed=DEFAULT_SEED,
                                   maxiter=ARPACK_MAXITER):
    """Largest eigenpair of S x = sigma A x for SPD A and PSD S.

    S may be a sparse matrix or a LinearOperator. The start vector is seeded
    so that repeated runs produce identical results.

    Returns:
        (sigma_max, x) with x normalized in the A-inner product.
    """
    A = scipy.sparse.csc_matrix(A)
    n = A.shape[0]
    if S.shape != A.shape:
        raise DimensionMismatchError(
            'operator %s and matrix %s shapes differ' % (S.shape, A.shape))
    v0 = start_vector(n, seed)
    if scipy.sparse.issparse(S) and S.count_nonzero() == 0:
        return 0.0, v0 / np.sqrt(v0 @ (A @ v0))
    if n <= 3:
        sigma, X = generalized_symmetric_eig(_dense(S, n), A.toarray())
        return float(sigma[-1]), X[:, -1]

    try:
        solve = scipy.sparse.linalg.factorized(A)
    except RuntimeError as exc:
        raise NotSPDError('A is singular: %s' % exc)
    a_inv = scipy.sparse.linalg.LinearOperator(
        (n, n), matvec=solve, dtype=float)
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(
            S, k=1, M=A, Minv=a_inv, which='LA', v0=v0, tol=tol,
            ncv=min(n, ARPACK_NCV), maxiter=maxiter)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise EigenNonConvergenceError(
            'ARPACK did not converge after %d iterations (%s)' % (
                maxiter, exc))
    except scipy.sparse.linalg.ArpackError as exc:
        logger.debug('ARPACK failed (%s); retrying with LOBPCG', exc)
        return _largest_lobpcg(S, A, v0, tol, maxiter)
    x = vecs[:, 0]
    x = x / np.sqrt(x @ (A @ x))
    return float(vals[0]), x


def _largest_lobpcg(S, A, v0, tol, maxiter):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        vals, vecs = scipy.sparse.linalg.lobpcg(
            S, v0.reshape(-1, 1), B=A, largest=True, tol=tol,
            maxiter=maxiter)
    if any('not reaching the requested tolerance' in str(w.message)
           for w in caught):
        raise EigenNonConvergenceError(
            'LOBPCG did not reach tolerance %g' % tol)
    x = vecs[:, 0]
    x = x / np.sqrt(x @ (A @ x))
    return float(vals[0]), x


def extreme_generalized_eigs(K, M, tol=1e-10, seed=DEFAULT_SEED,
                             dense_cap=None):
    """Smallest and largest eigenpairs of K x = lambda M x, both SPD.

    Returns:
        ((lam_min, x_min), (lam_max, x_max))
    """
    if dense_cap is None:
        dense_cap = DENSE_CAP
    K = scipy.sparse.csc_matrix(K)
    M = scipy.sparse.csc_matrix(M)
    n = K.shape[0]
    if n <= max(dense_cap, 3):
        lam, X = generalized_symmetric_eig(K.toarray(), M.toarray())
        return (lam[0], X[:, 0]), (lam[-1], X[:, -1])

    v0 = start_vector(n, seed)
    try:
        lo_val, lo_vec = scipy.sparse.linalg.eigsh(
            K, k=1, M=M, sigma=0.0, which='LM', v0=v0, tol=tol,
            ncv=min(n, ARPACK_NCV), maxiter=ARPACK_MAXITER)
        m_solve = scipy.sparse.linalg.factorized(M)
        m_inv = scipy.sparse.linalg.LinearOperator(
            (n, n), matvec=m_solve, dtype=float)
        hi_val, hi_vec = scipy.sparse.linalg.eigsh(
            K, k=1, M=M, Minv=m_inv, which='LA', v0=v0, tol=tol,
            ncv=min(n, ARPACK_NCV), maxiter=ARPACK_MAXITER)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise EigenNonConvergenceError('ARPACK did not converge (%s)' % exc)
    return ((float(lo_val[0]), lo_vec[:, 0]),
            (float(hi_val[0]), hi_vec[:, 0]))
