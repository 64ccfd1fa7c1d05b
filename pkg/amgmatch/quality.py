"""Measure the quality of a coarse space.

In this file:

class QualityReport, the measured constants of one coarsening, with JSON
    serialization.
class SymmetrizedSmoother, Rbar = 2 M^-1 - M^-1 A M^-1 for a diagonal M.

functions:
    mu_global:
        mu_c^-1, the largest eigenvalue of D (I - Q) x = sigma A x, where Q
        is the D-orthogonal projector onto the range of P.
    projector_matrix, q_projector_check:
        Q itself and a numerical check that it is a D-self-adjoint
        projector fixing range(P).
    aggregate_spectrum, local_bound:
        the per-aggregate bound on mu_c^-1 from a splitting
        A = sum_j A_j + A_R with every A_j and A_R positive semidefinite.
    cr_ratio:
        the compatible relaxation rate rho(I - M_ff^-1 A_ff) on the
        complement space.
    epsilon_smoothness, smallest_eigvec_Tbar:
        how smooth a vector is for the smoother, and the smoothest vector.
"""
from dataclasses import dataclass, field
import json
import logging
import warnings

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from linalg_util.eigen_util import (
    DEFAULT_SEED, extreme_generalized_eigs, fix_sign,
    generalized_symmetric_eig, largest_generalized_eig_sparse)
from linalg_util.sparse_util import (
    DENSE_CAP, PSD_TOL, DimensionMismatchError, NumericalError,
    as_sparse_matrix, diagonal_of, galerkin_product, is_positive_semidefinite,
    l1_jacobi_diagonal, norm_inf)

logger = logging.getLogger(__name__)

AGGREGATE_SIZE_CAP = 8
# Tried in this order; delta_j = factor * (smallest row sum of A on agg j).
DELTA_FACTORS = (1.0 / 3.0, 0.5, 1.0, 0.0)
DAGGER = '†'
EIGEN_COUPLE_TOL = 1e-8
SMALL_EIGENVALUE = 1e-12
SMOOTHNESS_CG_RTOL = 1e-10


class QualityError(NumericalError):
    """Raise when a quality measure is undefined for its input."""
    module = 'quality'


def _diag_vector(A, D):
    if D is None:
        return diagonal_of(A)
    if scipy.sparse.issparse(D):
        D = D.diagonal()
    d = np.asarray(D, dtype=float)
    if d.ndim == 2:
        d = np.diag(d)
    if d.shape != (A.shape[0],):
        raise DimensionMismatchError(
            'diagonal of length %d for a matrix of size %d' % (
                d.size, A.shape[0]))
    return d


def complement_of_projector(P, d):
    """D (I - Q) = D - D P (P'DP)^-1 P'D as a sparse matrix.

    P has one nonzero per row, so P'DP is diagonal.
    """
    P = scipy.sparse.csr_matrix(P)
    DP = (scipy.sparse.diags(d) @ P).tocsr()
    c = np.asarray((P.multiply(DP)).sum(axis=0)).ravel()
    if np.any(c <= 0):
        raise QualityError('P has an empty or zero column')
    S = scipy.sparse.diags(d) - DP @ scipy.sparse.diags(1.0 / c) @ DP.T
    S = ((S + S.T) * 0.5).tocsr()
    S.eliminate_zeros()
    return S


def mu_global(A, D, P, tol=1e-8, dense_cap=DENSE_CAP, seed=DEFAULT_SEED):
    """Compute mu_c^-1 for the prolongator P.

    Args:
        A: SPD sparse matrix.
        D: diag(A) as a vector (None for diag(A)).
        P: prolongator with one nonzero per row.
        tol: relative tolerance of the iterative eigensolver.
        dense_cap: problems up to this size are solved densely.

    Returns:
        (mu_inv, worst_vector): the largest eigenvalue of
        D (I - Q) x = sigma A x and its A-normalized eigenvector.
    """
    A = as_sparse_matrix(A)
    d = _diag_vector(A, D)
    if P.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            'P has %d rows, A has %d' % (P.shape[0], A.shape[0]))
    S = complement_of_projector(P, d)
    n = A.shape[0]
    if n <= dense_cap:
        sigma, X = generalized_symmetric_eig(S.toarray(), A.toarray())
        mu_inv, x = float(sigma[-1]), X[:, -1]
    else:
        mu_inv, x = largest_generalized_eig_sparse(S, A, tol=tol, seed=seed)
    return max(mu_inv, 0.0), fix_sign(x)


def projector_matrix(P, d):
    """Q = P (P'DP)^-1 P'D as a sparse matrix."""
    P = scipy.sparse.csr_matrix(P)
    DP = (scipy.sparse.diags(d) @ P).tocsr()
    c = np.asarray((P.multiply(DP)).sum(axis=0)).ravel()
    return (P @ scipy.sparse.diags(1.0 / c) @ DP.T).tocsr()


@dataclass
class ProjectorDiagnostics(object):
    idempotency: float
    self_adjointness: float
    range_error: float

    @property
    def worst(self):
        return max(self.idempotency, self.self_adjointness, self.range_error)


def q_projector_check(P, d, samples=10, seed=DEFAULT_SEED):
    """Check Q^2 = Q, D Q = Q' D and Q P = P on random vectors.

    Returns:
        ProjectorDiagnostics with the largest deviation of each identity,
        relative to the size of the quantities compared.
    """
    d = np.asarray(d, dtype=float)
    Q = projector_matrix(P, d)
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((P.shape[0], samples))
    U = rng.standard_normal((P.shape[0], samples))
    QV = Q @ V
    idempotency = np.max(np.abs(Q @ QV - QV)) / max(np.max(np.abs(QV)), 1.0)
    left = U.T @ (d[:, None] * QV)
    right = (Q @ U).T @ (d[:, None] * V)
    self_adjointness = np.max(np.abs(left - right)) / max(
        np.max(np.abs(left)), 1.0)
    Pd = scipy.sparse.csr_matrix(P).toarray() if P.shape[1] <= DENSE_CAP \
        else None
    if Pd is None:
        H = rng.standard_normal((P.shape[1], samples))
        Ph = P @ H
        range_error = np.max(np.abs(Q @ Ph - Ph))
    else:
        range_error = np.max(np.abs(Q @ Pd - Pd), initial=0.0)
    return ProjectorDiagnostics(float(idempotency), float(self_adjointness),
                                float(range_error))


@dataclass
class AggregateSpectrum(object):
    """Spectrum of A_j x = lambda D_j x on one aggregate.

    lambda_2 is None for singletons. bound is the upper bound on the local
    mu_j^-1: 1 / lambda_2 when the weight restricted to the aggregate is the
    eigenvector of lambda_1, 1 / lambda_1 otherwise, inf when that eigenvalue
    vanishes.
    """
    lambda_1: float
    lambda_2: float
    bound: float
    eigen_couple: bool = False

    def to_dict(self):
        return {'lambda_1': self.lambda_1, 'lambda_2': self.lambda_2,
                'bound': self.bound if np.isfinite(self.bound) else None,
                'eigen_couple': self.eigen_couple}


def _spectrum_bound(lam, vectors, z):
    """Shared by aggregate_spectrum and the batched path of local_bound.

    lam, vectors: eigenpairs of the scaled block D^-1/2 A_j D^-1/2.
    z: D^1/2 w on the aggregate, or None.
    """
    couple = False
    if z is not None and lam.size > 1:
        norm = np.linalg.norm(z)
        if norm > 0:
            couple = abs(vectors[:, 0] @ z) / norm >= 1 - EIGEN_COUPLE_TOL
    target = lam[1] if couple else lam[0]
    bound = 1.0 / target if target > SMALL_EIGENVALUE else np.inf
    lambda_2 = float(lam[1]) if lam.size > 1 else None
    return AggregateSpectrum(float(lam[0]), lambda_2, float(bound), couple)


def aggregate_spectrum(block, d, w=None):
    """Generalized spectrum of one aggregate block.

    Args:
        block: dense s x s matrix A_j (after any diagonal shift).
        d: the s diagonal entries of D on the aggregate.
        w: weight vector on the aggregate, or None to use 1 / lambda_1.

    Returns:
        AggregateSpectrum.
    """
    block = np.asarray(block, dtype=float)
    d = np.asarray(d, dtype=float)
    if block.shape[0] == 1:
        return AggregateSpectrum(1.0, None, 1.0)
    lam, vectors = generalized_symmetric_eig(block, np.diag(d))
    # vectors are D-orthonormal; D^1/2 x are the scaled eigenvectors
    scaled = np.sqrt(d)[:, None] * vectors
    z = None if w is None else np.sqrt(d) * np.asarray(w, dtype=float)
    return _spectrum_bound(lam, scaled, z)


@dataclass
class LocalBound(object):
    """Result of local_bound. bound is None when no splitting was found."""
    bound: object
    splitting_verified: bool
    per_aggregate: list = field(default_factory=list)
    delta_factor: object = None

    @property
    def available(self):
        return self.bound is not None


def _blocks_by_size(A, agg):
    """Dense diagonal blocks of A, grouped by aggregate size.

    Returns:
        dict size -> (aggregate ids, blocks of shape (k, size, size)).
    """
    coo = A.tocoo()
    agg_of = agg.agg_of
    position = np.empty(agg.n, dtype=np.int64)
    for members in agg.aggregates:
        position[members] = np.arange(members.size)
    inside = agg_of[coo.row] == agg_of[coo.col]
    rows, cols, vals = coo.row[inside], coo.col[inside], coo.data[inside]

    sizes = agg.sizes()
    slot = np.empty(agg.n_aggregates, dtype=np.int64)
    entry_size = sizes[agg_of[rows]]
    grouped = {}
    for size in np.unique(sizes):
        ids = np.flatnonzero(sizes == size)
        slot[ids] = np.arange(ids.size)
        blocks = np.zeros((ids.size, size, size))
        mine = entry_size == size
        np.add.at(blocks, (slot[agg_of[rows[mine]]], position[rows[mine]],
                           position[cols[mine]]), vals[mine])
        grouped[int(size)] = (ids, blocks)
    return grouped


def local_bound(A, agg, D=None, delta_policy=DELTA_FACTORS, w=None,
                size_cap=AGGREGATE_SIZE_CAP, tol=PSD_TOL):
    """Bound mu_c^-1 aggregate by aggregate.

    For each factor in delta_policy, delta_j = factor * min(A|agg_j 1) is
    taken off the diagonal of every block A_j = A|agg_j - delta_j I and
    credited to the remainder A_R = A - blkdiag(A_j). The first factor for
    which every A_j and A_R are positive semidefinite (to tol * ||A||) and
    every aggregate bound is finite gives the result; the bound is the
    largest aggregate bound, singletons counting 1.

    Args:
        A: SPD sparse matrix.
        agg: AggregateSet.
        D: diag(A) as a vector, None for diag(A).
        delta_policy: the factors to try, in order.
        w: weight vector, None for all ones.
        size_cap: largest aggregate size accepted.
        tol: PSD tolerance relative to ||A||.

    Returns:
        LocalBound; its bound is None (reported as a dagger) when no factor
        gives a valid splitting.
    """
    A = as_sparse_matrix(A)
    d = _diag_vector(A, D)
    if agg.n != A.shape[0]:
        raise DimensionMismatchError(
            'aggregates cover %d indices, A has %d' % (agg.n, A.shape[0]))
    sizes = agg.sizes()
    if sizes.size and sizes.max() > size_cap:
        raise QualityError('aggregate of size %d exceeds the cap of %d' % (
            sizes.max(), size_cap))
    w = np.ones(A.shape[0]) if w is None else np.asarray(w, dtype=float)
    scale = norm_inf(A)

    grouped = _blocks_by_size(A, agg)
    coo = A.tocoo()
    inside = agg.agg_of[coo.row] == agg.agg_of[coo.col]
    A_W = scipy.sparse.csr_matrix(
        (coo.data[inside], (coo.row[inside], coo.col[inside])),
        shape=A.shape)
    min_row_sum = np.empty(agg.n_aggregates)
    for size, (ids, blocks) in grouped.items():
        min_row_sum[ids] = blocks.sum(axis=2).min(axis=1)

    for factor in delta_policy:
        delta = factor * min_row_sum
        per_aggregate = [None] * agg.n_aggregates
        valid = True
        for size, (ids, blocks) in grouped.items():
            if size == 1:
                for j in ids:
                    per_aggregate[j] = AggregateSpectrum(1.0, None, 1.0)
                if np.any(blocks[:, 0, 0] - delta[ids] < -tol * scale):
                    valid = False
                    break
                continue
            shifted = blocks - delta[ids, None, None] * np.eye(size)
            members = np.array([agg.aggregates[j] for j in ids])
            dj = d[members]
            root = np.sqrt(dj)
            scaled = shifted / root[:, :, None] / root[:, None, :]
            lam, vectors = np.linalg.eigh(scaled)
            if lam[:, 0].min() < -tol * scale / dj.min():
                valid = False
                break
            z = root * w[members]
            for k, j in enumerate(ids):
                per_aggregate[j] = _spectrum_bound(
                    np.maximum(lam[k], 0.0), vectors[k], z[k])
                if not np.isfinite(per_aggregate[j].bound):
                    valid = False
            if not valid:
                break
        if not valid:
            logger.debug('delta factor %.3f: aggregate blocks rejected',
                         factor)
            continue
        delta_diag = delta[agg.agg_of]
        remainder = (A - A_W + scipy.sparse.diags(delta_diag)).tocsr()
        if not is_positive_semidefinite(remainder, tol=tol, scale=scale):
            logger.debug('delta factor %.3f: remainder not PSD', factor)
            continue
        bound = max(s.bound for s in per_aggregate) if per_aggregate else 1.0
        return LocalBound(float(bound), True, per_aggregate, factor)
    return LocalBound(None, False, [], None)


def cr_ratio(A, P_f, M, tol=1e-6, seed=DEFAULT_SEED):
    """Compatible relaxation rate rho(I - M_ff^-1 A_ff).

    Both A_ff = P_f' A P_f and M_ff = P_f' M P_f are SPD, so the rate is
    max(|1 - lambda_min|, |lambda_max - 1|) over A_ff x = lambda M_ff x.
    Without complement columns the rate is 0.
    """
    A = as_sparse_matrix(A)
    P_f = scipy.sparse.csr_matrix(getattr(P_f, 'P_f', P_f))
    if P_f.shape[1] == 0:
        warnings.warn('no pairs: the complement space is empty, rho_f = 0')
        return 0.0
    M = np.asarray(M, dtype=float)
    A_ff = galerkin_product(P_f, A)
    M_ff = galerkin_product(P_f, scipy.sparse.diags(M).tocsr())
    (lam_min, _), (lam_max, _) = extreme_generalized_eigs(
        A_ff, M_ff, tol=tol, seed=seed)
    rho = max(abs(1.0 - lam_min), abs(lam_max - 1.0))
    logger.debug('compatible relaxation: lambda in [%.6f, %.6f], rho %.6f',
                 lam_min, lam_max, rho)
    return float(rho)


class SymmetrizedSmoother(object):
    """Rbar = 2 M^-1 - M^-1 A M^-1 for the diagonal smoother M.

    M defaults to the l1-Jacobi diagonal of A, for which Rbar is always SPD.
    """

    def __init__(self, A, M=None):
        self.A = as_sparse_matrix(A)
        self.M = (l1_jacobi_diagonal(self.A) if M is None
                  else np.asarray(M, dtype=float))
        if self.M.shape != (self.A.shape[0],) or np.any(self.M <= 0):
            raise QualityError('smoother diagonal must be positive, one '
                               'entry per row')
        self._h_max = None

    @property
    def n(self):
        return self.A.shape[0]

    def apply(self, v):
        u = v / self.M
        return 2.0 * u - (self.A @ u) / self.M

    def operator(self):
        return scipy.sparse.linalg.LinearOperator(
            (self.n, self.n), matvec=self.apply, dtype=float)

    def h_max(self):
        """Largest eigenvalue of A x = h M x."""
        if self._h_max is None:
            self._h_max, _ = largest_generalized_eig_sparse(
                self.A, scipy.sparse.diags(self.M).tocsc(), tol=1e-10)
        return self._h_max

    def check_spd(self):
        """Rbar is SPD iff the spectrum of M^-1 A lies below 2."""
        h = self.h_max()
        if not h < 2.0:
            raise QualityError(
                'smoother does not converge: rho(M^-1 A) = %.6f >= 2' % h)
        return h


def epsilon_smoothness(v, A, smoother=None):
    """||v||_A^2 / ||v||_{Rbar^-1}^2, between 0 and 1 for an SPD Rbar.

    ||v||_{Rbar^-1}^2 = v' z with Rbar z = v solved by conjugate gradients.
    """
    A = as_sparse_matrix(A)
    if smoother is None:
        smoother = SymmetrizedSmoother(A)
    smoother.check_spd()
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise QualityError('smoothness of the zero vector is undefined')
    z, info = scipy.sparse.linalg.cg(
        smoother.operator(), v, rtol=SMOOTHNESS_CG_RTOL, atol=0.0,
        maxiter=10 * smoother.n)
    if info != 0:
        raise QualityError('CG on Rbar z = v did not converge (info %d)' %
                           info)
    return float(v @ (A @ v)) / float(v @ z)


def smallest_eigvec_Tbar(A, smoother=None, tol=1e-10, seed=DEFAULT_SEED):
    """Eigenvector of the smallest eigenvalue of Tbar = Rbar A.

    Tbar shares its eigenvectors with A x = h M x, with eigenvalues
    (2 - h) h. That function is concave, so the smallest eigenvalue of Tbar
    comes from the smallest or the largest h.

    Returns:
        (t, x): the eigenvalue and its eigenvector with ||x||_2 = 1, first
        non-negligible entry positive.
    """
    A = as_sparse_matrix(A)
    if smoother is None:
        smoother = SymmetrizedSmoother(A)
    smoother.check_spd()
    (h_lo, x_lo), (h_hi, x_hi) = extreme_generalized_eigs(
        A, scipy.sparse.diags(smoother.M), tol=tol, seed=seed)
    t_lo, t_hi = (2.0 - h_lo) * h_lo, (2.0 - h_hi) * h_hi
    t, x = (t_lo, x_lo) if t_lo <= t_hi else (t_hi, x_hi)
    x = np.asarray(x, dtype=float)
    return float(t), fix_sign(x / np.linalg.norm(x))


@dataclass
class QualityReport(object):
    """The measured constants of a coarsening.

    bound is None when no splitting was found; it is printed as a dagger.
    """
    mu_inv: float
    bound: object
    splitting_verified: bool
    rho_f: object = None
    per_aggregate: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mu_inv < 0:
            raise QualityError('mu_inv must be non-negative')
        if self.bound is None and self.splitting_verified:
            raise QualityError('a verified splitting needs a bound')

    @property
    def bound_label(self):
        return format_bound(self.bound)

    def to_dict(self):
        return {
            'mu_inv': self.mu_inv,
            'bound': self.bound,
            'splitting_verified': self.splitting_verified,
            'rho_f': self.rho_f,
            'per_aggregate': [
                s.to_dict() if isinstance(s, AggregateSpectrum) else s
                for s in self.per_aggregate],
            'metadata': self.metadata,
        }

    def to_json(self, filename=None):
        """Serialize; write to filename when given."""
        json_data = json.dumps(self.to_dict(), indent=4, sort_keys=True)
        if filename is not None:
            with open(filename, 'w') as outfile:
                outfile.write(json_data)
        return json_data

    @classmethod
    def from_json(cls, json_data):
        data = json.loads(json_data)
        return cls(data['mu_inv'], data['bound'], data['splitting_verified'],
                   data.get('rho_f'), data.get('per_aggregate', []),
                   data.get('metadata', {}))


def format_bound(bound):
    """'%.3f' of the bound, or a dagger when no splitting was found."""
    return DAGGER if bound is None else '%.3f' % bound


def evaluate(A, P, agg, complement=None, w=None, smoother_diagonal=None,
             metadata=None):
    """Build the QualityReport of a (composite) prolongator.

    Args:
        A: fine SPD matrix.
        P: prolongator matrix whose column j lives on aggregate j of agg.
        agg: AggregateSet.
        complement: ComplementProlongator or P_f matrix; rho_f is left out
            when None.
        w: the weight vector the aggregates were built from.
        smoother_diagonal: M for rho_f, l1-Jacobi by default.
        metadata: dict echoed in the report.
    """
    A = as_sparse_matrix(A)
    d = diagonal_of(A)
    mu_inv, _ = mu_global(A, d, P)
    local = local_bound(A, agg, d, w=w)
    rho_f = None
    if complement is not None:
        if smoother_diagonal is None:
            smoother_diagonal = l1_jacobi_diagonal(A)
        rho_f = cr_ratio(A, complement, smoother_diagonal)
    return QualityReport(mu_inv, local.bound, local.splitting_verified,
                         rho_f, local.per_aggregate, dict(metadata or {}))
