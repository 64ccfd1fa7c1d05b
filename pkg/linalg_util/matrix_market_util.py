"""Read and write sparse matrices in Matrix Market coordinate format.

Only real (or integer) coordinate files with general or symmetric storage are
accepted. Symmetric files are expanded to the full pattern on read; symmetric
matrices are written as their lower triangle with 17 significant digits so
that a write followed by a read reproduces every entry.
"""
import scipy.io
import scipy.sparse

from linalg_util.sparse_util import (
    NumericalError, SYMMETRY_TOL, as_sparse_matrix, max_abs)

MM_PRECISION = 17


class MatrixMarketError(NumericalError, ValueError):
    """Raise when a Matrix Market file cannot be used as an operator."""
    pass


def read_matrix_market(path):
    """Load a square real matrix from a Matrix Market file as CSR."""
    try:
        rows, cols, _, fmt, field, symmetry = scipy.io.mminfo(path)
    except (OSError, ValueError, IndexError, TypeError, RuntimeError) as exc:
        raise MatrixMarketError('malformed header in %s: %s' % (path, exc))
    if fmt != 'coordinate':
        raise MatrixMarketError(
            '%s: coordinate format required, found %s' % (path, fmt))
    if field not in ('real', 'integer', 'double'):
        raise MatrixMarketError(
            '%s: real entries required, found field "%s"' % (path, field))
    if symmetry not in ('general', 'symmetric'):
        raise MatrixMarketError(
            '%s: general or symmetric storage required, found %s' % (
                path, symmetry))
    if rows != cols:
        raise MatrixMarketError(
            '%s: non-square matrix (%d x %d)' % (path, rows, cols))
    try:
        A = scipy.io.mmread(path)
    except (ValueError, IndexError, OverflowError, RuntimeError) as exc:
        raise MatrixMarketError('cannot read %s: %s' % (path, exc))
    A = scipy.sparse.csr_matrix(A, dtype=float)
    return as_sparse_matrix(A, symmetric=(symmetry == 'symmetric'))


def write_matrix_market(A, path, comment=''):
    """Write A to path, using symmetric storage when A is symmetric."""
    A = scipy.sparse.coo_matrix(A)
    symmetric = (A.shape[0] == A.shape[1] and
                 max_abs((A - A.T).tocsr()) <= SYMMETRY_TOL * max_abs(
                     A.tocsr()))
    with open(path, 'wb') as target:
        scipy.io.mmwrite(
            target, A, comment=comment, field='real',
            precision=MM_PRECISION,
            symmetry='symmetric' if symmetric else 'general')
