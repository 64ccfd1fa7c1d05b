"""Helpers for building test matrices and dense reference values."""
import numpy as np
import scipy.sparse


def random_spd_graph(n, density, rng):
    """A diagonally dominant M-matrix on a random graph; the pattern holds at
    least the edge (0, 1)."""
    upper = scipy.sparse.random(n, n, density=density, random_state=rng,
                                data_rvs=lambda k: rng.uniform(0.1, 2.0, k))
    upper = scipy.sparse.triu(upper, k=1).tolil()
    upper[0, 1] = rng.uniform(0.1, 2.0)
    upper = upper.tocsr()
    off = -(upper + upper.T)
    row_sums = np.asarray(abs(off).sum(axis=1)).ravel()
    diagonal = row_sums + rng.uniform(0.1, 1.0, n)
    return (off + scipy.sparse.diags(diagonal)).tocsr()


def dense_mu_inv(A, P):
    """mu_c^-1 straight from its definition, with dense matrices."""
    A = A.toarray()
    P = P.toarray() if scipy.sparse.issparse(P) else np.asarray(P)
    D = np.diag(np.diag(A))
    Q = P @ np.linalg.solve(P.T @ D @ P, P.T @ D)
    S = D @ (np.eye(A.shape[0]) - Q)
    Linv = np.linalg.inv(np.linalg.cholesky(A))
    T = Linv @ S @ Linv.T
    return np.linalg.eigvalsh(0.5 * (T + T.T)).max()


def dense_error_operator(apply_E, n):
    """The matrix of a linear error operator, column by column."""
    return np.column_stack([apply_E(e) for e in np.eye(n)])


def a_norm(E, A):
    """||E||_A for dense E and SPD A."""
    A = A.toarray() if scipy.sparse.issparse(A) else np.asarray(A)
    L = np.linalg.cholesky(A)
    return np.linalg.norm(L.T @ E @ np.linalg.inv(L.T), 2)
