"""Smoothers, two-level and V-cycle AMG, and the measurements made on them.

All errors are measured in the A-norm. The l1-Jacobi smoother
x <- x + M^-1 (b - A x) is convergent for every SPD A, and the V(1,1) cycle
with the same smoother before and after the coarse correction is a symmetric
positive definite preconditioner, so it can drive conjugate gradients.
"""
from dataclasses import dataclass
import logging
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from linalg_util.eigen_util import DEFAULT_SEED, start_vector
from linalg_util.sparse_util import (
    DENSE_CAP, DimensionMismatchError, NumericalError, as_sparse_matrix,
    l1_jacobi_diagonal)

logger = logging.getLogger(__name__)


class SolverError(NumericalError):
    """Raise when a solver or one of its components breaks down."""
    module = 'solver'


@dataclass(frozen=True)
class SmootherConfig(object):
    kind: str = 'l1-jacobi'
    sweeps: int = 1
    damping: float = 1.0

    def __post_init__(self):
        if self.kind != 'l1-jacobi':
            raise SolverError('unknown smoother "%s"' % self.kind)
        if self.sweeps < 1:
            raise SolverError('smoother sweeps must be >= 1, got %d' %
                              self.sweeps)
        if not self.damping > 0:
            raise SolverError('damping must be positive, got %g' %
                              self.damping)


def smoother_diagonal(A, config=None):
    """M with x <- x + M^-1 r equal to one damped l1-Jacobi sweep."""
    config = config or SmootherConfig()
    return l1_jacobi_diagonal(A) / config.damping


def smooth_apply(A, M, x, b, sweeps=1):
    """x <- x + M^-1 (b - A x), sweeps times; returns a new vector."""
    x = np.array(x, dtype=float)
    if x.shape != b.shape or x.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            'smoothing a %dx%d system with x %s and b %s' % (
                A.shape[0], A.shape[1], x.shape, np.shape(b)))
    for _ in range(sweeps):
        x += (b - A @ x) / M
    return x


class CoarseSolver(object):
    """Exact solves with the coarse matrix: dense Cholesky up to DENSE_CAP
    rows, sparse LU beyond."""

    def __init__(self, A_c, dense_cap=DENSE_CAP):
        self.n = A_c.shape[0]
        try:
            if self.n <= dense_cap:
                dense = A_c.toarray() if scipy.sparse.issparse(A_c) \
                    else np.asarray(A_c)
                factor = scipy.linalg.cho_factor(dense)
                self._solve = lambda b: scipy.linalg.cho_solve(factor, b)
            else:
                self._solve = scipy.sparse.linalg.factorized(
                    scipy.sparse.csc_matrix(A_c))
        except (scipy.linalg.LinAlgError, RuntimeError) as exc:
            raise SolverError('singular coarse matrix: %s' % exc)

    def solve(self, b):
        return self._solve(np.asarray(b, dtype=float))


def tl_apply(A, P, M, coarse_solver, g):
    """Two-level post-smoothed method: w = P A_c^-1 P' g, then one smoothing
    step, B g = w + M^-1 (g - A w)."""
    w = P @ coarse_solver.solve(P.T @ g)
    return w + (g - A @ w) / M


def tl_error_apply(A, P, M, coarse_solver, e):
    """E e = (I - M^-1 A)(I - P A_c^-1 P' A) e."""
    return e - tl_apply(A, P, M, coarse_solver, A @ e)


class VCycle(object):
    """V(pre, post) cycle over a Hierarchy, l1-Jacobi on every level but the
    coarsest, which is solved exactly."""

    def __init__(self, hierarchy, pre=1, post=1):
        if hierarchy.n_levels < 2:
            raise SolverError('a V-cycle needs at least two levels')
        if pre < 0 or post < 0 or pre + post == 0:
            raise SolverError('need some smoothing, got pre=%d post=%d' % (
                pre, post))
        self.hierarchy = hierarchy
        self.pre = pre
        self.post = post
        self.coarse_solver = CoarseSolver(hierarchy.levels[-1].A)

    @property
    def n(self):
        return self.hierarchy.levels[0].size

    def _cycle(self, k, g):
        levels = self.hierarchy.levels
        if k == len(levels) - 1:
            return self.coarse_solver.solve(g)
        level = levels[k]
        A, M, P = level.A, level.M, level.P
        x = np.zeros_like(g)
        for _ in range(self.pre):
            x += (g - A @ x) / M
        x += P @ self._cycle(k + 1, P.T @ (g - A @ x))
        for _ in range(self.post):
            x += (g - A @ x) / M
        return x

    def apply(self, g):
        """B g for the residual g."""
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n,):
            raise DimensionMismatchError(
                'residual of shape %s for a hierarchy of size %d' % (
                    g.shape, self.n))
        return self._cycle(0, g)

    def error_apply(self, e):
        """(I - B A) e."""
        return e - self.apply(self.hierarchy.levels[0].A @ e)

    def as_linear_operator(self):
        return scipy.sparse.linalg.LinearOperator(
            (self.n, self.n), matvec=self.apply, dtype=float)


def vcycle_apply(hierarchy, g, pre=1, post=1):
    """One V(pre, post) cycle on the residual g."""
    return VCycle(hierarchy, pre, post).apply(g)


def refine_weight(A, M, w0, k):
    """Apply k smoothing steps to the homogeneous system A w = 0.

    w_k = (I - M^-1 A)^k w0, rescaled to unit max-norm after every step.
    Scaling does not change the edge weights, so the aggregates built from
    w_k do not depend on it.
    """
    if k < 0:
        raise SolverError('refinement steps must be >= 0, got %d' % k)
    w = np.array(w0, dtype=float)

    def normalized(v):
        size = np.max(np.abs(v), initial=0.0)
        if not size > 0 or not np.isfinite(size):
            raise SolverError('weight vector vanished during refinement')
        return v / size

    w = normalized(w)
    for _ in range(k):
        w = normalized(w - (A @ w) / M)
    return w


def measure_conv_factor(apply_E, A, tol=1e-4, maxiter=500, seed=DEFAULT_SEED):
    """Asymptotic A-norm convergence factor of the error operator apply_E.

    Power iteration on a seeded random vector; stops once two successive
    ratios ||E e||_A / ||e||_A agree to relative tolerance tol.
    """
    A = scipy.sparse.csr_matrix(A)
    e = start_vector(A.shape[0], seed) - 1.0
    e /= np.sqrt(e @ (A @ e))
    previous = None
    for iteration in range(maxiter):
        e = apply_E(e)
        norm = np.sqrt(max(e @ (A @ e), 0.0))
        if norm == 0.0:
            return 0.0
        e /= norm
        if previous is not None and abs(norm - previous) <= tol * norm:
            logger.debug('convergence factor %.6f after %d iterations',
                         norm, iteration + 1)
            return float(norm)
        previous = norm
    warnings.warn('power iteration did not settle within %d iterations' %
                  maxiter)
    return float(norm)


def pcg_solve(A, preconditioner, b, rtol=1e-8, maxiter=None, x0=None,
              history=None):
    """Preconditioned conjugate gradients.

    Args:
        A: SPD matrix.
        preconditioner: callable r -> z (approximately A^-1 r), or None.
        b: right-hand side.
        rtol: stop when ||r||_2 <= rtol ||b||_2.
        maxiter: iteration cap, default 10 n.
        x0: initial guess, zero by default.
        history: optional list; the relative residual of every iteration is
            appended to it.

    Returns:
        (x, iterations). Raises SolverError on breakdown (a non-positive
        curvature or a non-positive r'z, which means the preconditioner or A
        is not SPD) and when maxiter is reached.
    """
    A = as_sparse_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    if preconditioner is None:
        def preconditioner(r):
            return r.copy()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(n), 0
    if np.linalg.norm(r) <= rtol * norm_b:
        return x, 0
    z = preconditioner(r)
    p = z.copy()
    gamma = r @ z
    for iteration in range(1, maxiter + 1):
        if not gamma > 0:
            raise SolverError('PCG breakdown: r\'z = %.3e; the '
                              'preconditioner is not SPD' % gamma)
        Ap = A @ p
        curvature = p @ Ap
        if not curvature > 0:
            raise SolverError('PCG breakdown: p\'Ap = %.3e; the matrix is '
                              'not SPD' % curvature)
        alpha = gamma / curvature
        x += alpha * p
        r -= alpha * Ap
        relative = np.linalg.norm(r) / norm_b
        if history is not None:
            history.append(relative)
        if relative <= rtol:
            logger.debug('PCG converged in %d iterations', iteration)
            return x, iteration
        z = preconditioner(r)
        gamma_old = gamma
        gamma = r @ z
        p = z + (gamma / gamma_old) * p
    raise SolverError('PCG did not reach %.1e in %d iterations' % (
        rtol, maxiter))
