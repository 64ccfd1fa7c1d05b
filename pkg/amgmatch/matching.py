"""Edge weights and matchings on the adjacency graph of a sparse SPD matrix.

The weight of the edge (i, j) measures how well the pair {i, j} represents the
weight vector w on the coarse space:

    ahat_ij = 1 - 2 a_ij w_i w_j / (a_ii w_i^2 + a_jj w_j^2)

A matching of maximum product of these weights is computed as a matching of
maximum sum of log(ahat_ij). Only edges with a positive log gain take part;
the others can never increase the objective.

The concrete matchers live in approx_matching.py (suitor, Preis, auction) and
exact_matching.py (blossom, brute force). Use get_matcher to obtain one by
name.
"""
import abc
from dataclasses import dataclass
import logging
import warnings

import numpy as np
import scipy.sparse

from linalg_util.sparse_util import (
    DimensionMismatchError, NumericalError, as_sparse_matrix, diagonal_of)

logger = logging.getLogger(__name__)

UNMATCHED = -1
# Edges whose weight does not exceed this floor are never candidates.
WEIGHT_FLOOR = 1e-12

MATCHER_NAMES = ('exact', 'suitor', 'preis', 'auction', 'bruteforce')


class MatchingError(NumericalError):
    """Raise when a matcher fails or produces an invalid matching."""
    module = 'matching'


class InvalidMatcherParamsError(MatchingError, ValueError):
    """Raise when parameters that do not make sense are suggested."""
    pass


def edge_key(logw, u, v):
    """Total order on edges: heavier first, then toward lower indices."""
    return (logw, -min(u, v), -max(u, v))


@dataclass(frozen=True)
class EdgeWeights(object):
    """Edge weights of the off-diagonal graph of A.

    Edges are stored once, as rows < cols, in CSR order of the upper
    triangle, so the weight of (i, j) and (j, i) is the same number.
    """
    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    @property
    def n_edges(self):
        return self.rows.size

    def matrix(self):
        """The symmetric weight matrix (zero diagonal)."""
        upper = scipy.sparse.coo_matrix(
            (self.weights, (self.rows, self.cols)), shape=(self.n, self.n))
        full = (upper + upper.T).tocsr()
        full.sort_indices()
        return full

    def candidate_mask(self, floor=WEIGHT_FLOOR):
        """Edges with weight above floor and a positive log gain."""
        return (self.weights > floor) & (self.weights > 1.0)

    def candidates(self, floor=WEIGHT_FLOOR):
        """(rows, cols, log weights) of the candidate edges, rows < cols."""
        keep = self.candidate_mask(floor)
        return (self.rows[keep], self.cols[keep],
                np.log(self.weights[keep]))

    def candidate_graph(self, floor=WEIGHT_FLOOR):
        """Adjacency of the candidate edges as python lists (indptr, indices,
        log weights), neighbours in ascending order."""
        rows, cols, logw = self.candidates(floor)
        upper = scipy.sparse.coo_matrix(
            (logw, (rows, cols)), shape=(self.n, self.n))
        full = (upper + upper.T).tocsr()
        full.sort_indices()
        return full.indptr.tolist(), full.indices.tolist(), full.data.tolist()

    def log_weight(self, i, j):
        """log(ahat_ij), or None when (i, j) is not an edge."""
        i, j = min(i, j), max(i, j)
        lo = np.searchsorted(self.rows, i, side='left')
        hi = np.searchsorted(self.rows, i, side='right')
        k = lo + np.searchsorted(self.cols[lo:hi], j)
        if k < hi and self.cols[k] == j:
            return float(np.log(self.weights[k])) if self.weights[k] > 0 \
                else -np.inf
        return None


def compute_edge_weights(A, w):
    """Compute the edge weights of A for the weight vector w.

    Args:
        A: symmetric sparse matrix with a positive diagonal.
        w: weight vector, one entry per row of A.

    Returns:
        EdgeWeights over the off-diagonal pattern of A. Explicitly stored
        zeros are edges of weight 1.
    """
    A = as_sparse_matrix(A)
    w = np.asarray(w, dtype=float)
    if w.shape != (A.shape[0],):
        raise DimensionMismatchError(
            'weight vector of shape %s for a %dx%d matrix' % (
                w.shape, A.shape[0], A.shape[1]))
    d = diagonal_of(A)
    if np.any(w == 0):
        logger.debug('weight vector has %d zero entries',
                     np.count_nonzero(w == 0))

    upper = scipy.sparse.triu(A, k=1, format='csr')
    upper.sort_indices()
    rows = np.repeat(np.arange(A.shape[0]), np.diff(upper.indptr))
    cols = upper.indices.astype(np.int64)
    a = upper.data
    denominator = d[rows] * w[rows] ** 2 + d[cols] * w[cols] ** 2
    weights = np.ones(rows.size)
    ok = denominator > 0
    if not np.all(ok):
        warnings.warn('%d edges join two zero weight entries; their weight '
                      'is set to 1' % np.count_nonzero(~ok))
    weights[ok] = 1.0 - 2.0 * a[ok] * w[rows[ok]] * w[cols[ok]] / \
        denominator[ok]
    return EdgeWeights(A.shape[0], rows.astype(np.int64), cols, weights)


class Matching(object):
    """A set of vertex-disjoint edges, as a partner array.

    partner[i] is the vertex matched with i, or UNMATCHED. product_log is the
    sum of log weights of the matched edges. converged is False only when an
    iterative matcher stopped at its iteration cap.
    """

    def __init__(self, partner, product_log=0.0, converged=True):
        self.partner = np.asarray(partner, dtype=np.int64)
        self.product_log = float(product_log)
        self.converged = converged

    @classmethod
    def from_pairs(cls, n, pairs, edge_weights=None, converged=True):
        partner = np.full(n, UNMATCHED, dtype=np.int64)
        for i, j in pairs:
            partner[i] = j
            partner[j] = i
        product_log = 0.0
        if edge_weights is not None:
            product_log = matching_objective(edge_weights, partner)
        return cls(partner, product_log, converged)

    @property
    def n(self):
        return self.partner.size

    def pairs(self):
        """Matched edges (i, j), i < j, ordered by i."""
        i = np.flatnonzero(self.partner > np.arange(self.n))
        return list(zip(i.tolist(), self.partner[i].tolist()))

    @property
    def n_pairs(self):
        return int(np.count_nonzero(self.partner != UNMATCHED)) // 2

    def unmatched(self):
        return np.flatnonzero(self.partner == UNMATCHED)

    def validate(self, edge_weights=None):
        """Raise MatchingError unless partner is an involution whose pairs
        are edges of the graph."""
        p = self.partner
        matched = np.flatnonzero(p != UNMATCHED)
        if matched.size and (p[matched].min() < 0 or
                             p[matched].max() >= self.n):
            raise MatchingError('partner index out of range')
        if np.any(p[matched] == matched):
            raise MatchingError('vertex matched with itself')
        if np.any(p[p[matched]] != matched):
            raise MatchingError('partner map is not an involution')
        if edge_weights is not None:
            for i, j in self.pairs():
                if edge_weights.log_weight(i, j) is None:
                    raise MatchingError('(%d, %d) is not an edge' % (i, j))

    def __repr__(self):
        return 'Matching(%d pairs of %d vertices, log product %.6g)' % (
            self.n_pairs, self.n, self.product_log)


def matching_objective(edge_weights, partner):
    """Sum of log weights over the matched edges of partner."""
    partner = np.asarray(partner)
    total = 0.0
    for i in np.flatnonzero(partner > np.arange(partner.size)):
        logw = edge_weights.log_weight(i, partner[i])
        if logw is None:
            raise MatchingError('(%d, %d) is not an edge' % (i, partner[i]))
        total += logw
    return total


class Matcher(object, metaclass=abc.ABCMeta):
    """Abstract base class for matching algorithms.

    Matcher cannot be directly instantiated. Subclasses implement match and
    validate_params; name is the key used by get_matcher and in reports.
    """

    name = None

    def __init__(self, **params):
        self.params = self.validate_params(params)

    @abc.abstractmethod
    def match(self, edge_weights):
        """Return the Matching of the candidate edges of edge_weights."""
        pass

    @staticmethod
    def validate_params(raw_params):
        """Take a dictionary of raw parameters, validate them and return the
        cooked parameters. Raises InvalidMatcherParamsError.
        """
        if raw_params:
            raise InvalidMatcherParamsError(
                'unexpected parameters %s' % sorted(raw_params))
        return {}

    def __call__(self, edge_weights):
        return self.match(edge_weights)

    def __repr__(self):
        return '%s(%s)' % (self.__class__.__name__, self.params)


def get_matcher(name, **params):
    """Instantiate the matcher registered under name."""
    # imported here, the implementations import this module
    from amgmatch import approx_matching, exact_matching
    matchers = {
        'suitor': approx_matching.SuitorMatcher,
        'preis': approx_matching.PreisMatcher,
        'auction': approx_matching.AuctionMatcher,
        'exact': exact_matching.ExactMatcher,
        'bruteforce': exact_matching.BruteForceMatcher,
    }
    if name not in matchers:
        raise InvalidMatcherParamsError(
            'unknown matcher "%s"; choose from %s' % (
                name, ', '.join(MATCHER_NAMES)))
    return matchers[name](**params)
