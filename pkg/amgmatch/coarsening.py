"""Aggregates, prolongators and hierarchies built from matchings.

In this file:

class AggregateSet, a partition of 0..n-1 into aggregates, numbered with the
    aggregates of two or more indices first (by lowest index), singletons
    after.
class Prolongator, the piecewise constant P whose column j is w restricted
    to aggregate j, normalized, and the coarse weight h with P h = w.
class ComplementProlongator, P_f spanning the D-orthogonal complement of the
    range of P inside every aggregate.
class Level and class Hierarchy, a stack of Galerkin operators.

functions:
    build_aggregates, build_prolongator, complement_prolongator,
    coarsen_sweeps, build_amg_hierarchy, read_aggregate_csv,
    write_aggregate_csv.
"""
import logging
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse

from amgmatch.matching import (
    UNMATCHED, Matcher, compute_edge_weights, get_matcher)
from linalg_util.file_util import read_csv, write_csv
from linalg_util.sparse_util import (
    DimensionMismatchError, NumericalError, as_sparse_matrix, diagonal_of,
    galerkin_product, l1_jacobi_diagonal)

logger = logging.getLogger(__name__)

# A weight sub-vector below this norm cannot define a column of P.
ZERO_WEIGHT = 1e-300
MAX_COARSE = 40


class CoarseningError(NumericalError):
    """Raise when a coarse space cannot be built."""
    module = 'coarsening'


class AggregateSet(object):
    """Disjoint aggregates covering 0..n-1.

    agg_of[i] is the aggregate holding i and aggregates[j] the sorted indices
    of aggregate j.
    """

    def __init__(self, agg_of):
        self.agg_of = np.asarray(agg_of, dtype=np.int64)
        n_aggregates = int(self.agg_of.max()) + 1 if self.agg_of.size else 0
        if self.agg_of.size and self.agg_of.min() < 0:
            raise CoarseningError('every index needs an aggregate')
        order = np.argsort(self.agg_of, kind='stable')
        bounds = np.searchsorted(self.agg_of[order],
                                 np.arange(n_aggregates + 1))
        self.aggregates = [order[bounds[j]:bounds[j + 1]]
                           for j in range(n_aggregates)]
        if any(a.size == 0 for a in self.aggregates):
            raise CoarseningError('aggregate ids must be contiguous')

    @classmethod
    def from_groups(cls, groups, n):
        """Number groups of indices: larger aggregates first by lowest index,
        then singletons by index."""
        groups = [sorted(int(i) for i in g) for g in groups]
        multi = sorted((g for g in groups if len(g) > 1), key=lambda g: g[0])
        single = sorted((g for g in groups if len(g) == 1),
                        key=lambda g: g[0])
        agg_of = np.full(n, -1, dtype=np.int64)
        for j, group in enumerate(multi + single):
            if np.any(agg_of[group] >= 0):
                raise CoarseningError('aggregates overlap at %s' % group)
            agg_of[group] = j
        return cls(agg_of)

    @property
    def n(self):
        return self.agg_of.size

    @property
    def n_aggregates(self):
        return len(self.aggregates)

    def sizes(self):
        return np.array([a.size for a in self.aggregates], dtype=np.int64)

    @property
    def n_pairs(self):
        """Aggregates of two or more indices."""
        return int(np.count_nonzero(self.sizes() > 1))

    @property
    def n_singletons(self):
        return int(np.count_nonzero(self.sizes() == 1))

    def __repr__(self):
        return 'AggregateSet(%d indices, %d aggregates, %d singletons)' % (
            self.n, self.n_aggregates, self.n_singletons)


def build_aggregates(matching):
    """One aggregate per matched pair and one per unmatched vertex."""
    groups = [[i, j] for i, j in matching.pairs()]
    groups += [[i] for i in np.flatnonzero(matching.partner == UNMATCHED)]
    return AggregateSet.from_groups(groups, matching.n)


class Prolongator(object):
    """P (n x n_c), the coarse weight h with P h = w, and the kind of each
    column ('pair', 'aggregate' for more than two indices, 'singleton')."""

    def __init__(self, P, coarse_weight, column_kind, aggregates):
        self.P = P
        self.coarse_weight = coarse_weight
        self.column_kind = column_kind
        self.aggregates = aggregates

    @property
    def shape(self):
        return self.P.shape


class ComplementProlongator(object):
    """P_f (n x n_p): s - 1 unit columns per aggregate of size s, each
    D-orthogonal to the range of P."""

    def __init__(self, P_f, owner):
        self.P_f = P_f
        # aggregate id of each column
        self.owner = owner

    @property
    def n_columns(self):
        return self.P_f.shape[1]


def _split_zero_weight(agg, w):
    """Break aggregates whose weight sub-vector vanishes into singletons."""
    groups, demoted = [], 0
    for members in agg.aggregates:
        if members.size > 1 and np.linalg.norm(w[members]) < ZERO_WEIGHT:
            groups.extend([i] for i in members)
            demoted += 1
        else:
            groups.append(members)
    if not demoted:
        return agg
    logger.debug('demoted %d zero weight aggregates to singletons', demoted)
    return AggregateSet.from_groups(groups, agg.n)


def complement_prolongator(agg, w, d):
    """The D-orthogonal complement of w inside each aggregate.

    A pair (i, j) gets the single column (-w_j / d_i, w_i / d_j), normalized.
    Larger aggregates get an orthonormal basis of the complement of
    D^(1/2) w in the scaled variables, mapped back by D^(-1/2) and
    normalized.
    """
    rows, cols, vals, owner = [], [], [], []
    column = 0
    for j, members in enumerate(agg.aggregates):
        if members.size == 1:
            continue
        wa, da = w[members], d[members]
        if members.size == 2:
            basis = np.array([[-wa[1] / da[0]], [wa[0] / da[1]]])
        else:
            scaled = np.sqrt(da) * wa
            basis = scipy.linalg.null_space(scaled[None, :])
            basis = basis / np.sqrt(da)[:, None]
        basis = basis / np.linalg.norm(basis, axis=0)
        for k in range(basis.shape[1]):
            rows.extend(members.tolist())
            cols.extend([column] * members.size)
            vals.extend(basis[:, k].tolist())
            owner.append(j)
            column += 1
    P_f = scipy.sparse.csr_matrix((vals, (rows, cols)),
                                  shape=(agg.n, column))
    return ComplementProlongator(P_f, np.array(owner, dtype=np.int64))


def build_prolongator(agg, w, d):
    """Build P and P_f for the aggregates agg.

    Args:
        agg: AggregateSet.
        w: weight vector.
        d: diagonal of A, as a vector.

    Returns:
        (Prolongator, ComplementProlongator). Aggregates whose weights are
        all numerically zero are split into singletons first; the returned
        Prolongator carries the aggregates actually used.
    """
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    if w.shape != (agg.n,) or d.shape != (agg.n,):
        raise DimensionMismatchError(
            'aggregates of %d indices, weight %s, diagonal %s' % (
                agg.n, w.shape, d.shape))
    agg = _split_zero_weight(agg, w)

    n_c = agg.n_aggregates
    values = np.empty(agg.n)
    coarse_weight = np.empty(n_c)
    column_kind = []
    for j, members in enumerate(agg.aggregates):
        if members.size == 1:
            values[members] = -1.0 if w[members[0]] < 0 else 1.0
            coarse_weight[j] = abs(w[members[0]])
            column_kind.append('singleton')
        else:
            norm = np.linalg.norm(w[members])
            values[members] = w[members] / norm
            coarse_weight[j] = norm
            column_kind.append('pair' if members.size == 2 else 'aggregate')
    P = scipy.sparse.csr_matrix(
        (values, (np.arange(agg.n), agg.agg_of)), shape=(agg.n, n_c))
    return (Prolongator(P, coarse_weight, column_kind, agg),
            complement_prolongator(agg, w, d))


class Level(object):
    """One level of a hierarchy.

    A is the operator, w its weight vector, D and M its diagonal and
    l1-Jacobi diagonal. P, aggregates and matching lead to the next level
    and are None on the coarsest one.
    """

    def __init__(self, A, w):
        self.A = A
        self.w = w
        self.D = diagonal_of(A)
        self.M = l1_jacobi_diagonal(A)
        self.P = None
        self.aggregates = None
        self.matching = None

    @property
    def size(self):
        return self.A.shape[0]


class Hierarchy(object):
    """Levels with A_{k+1} = P_k' A_k P_k and strictly decreasing sizes."""

    def __init__(self, levels):
        self.levels = levels

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def sizes(self):
        return [level.size for level in self.levels]

    @property
    def coarse_weight(self):
        return self.levels[-1].w

    def composite_prolongator(self, start=0, stop=None):
        """P_start P_(start+1) ... P_(stop-1), mapping level stop to level
        start."""
        if stop is None:
            stop = self.n_levels - 1
        P = scipy.sparse.identity(self.levels[start].size, format='csr')
        for level in self.levels[start:stop]:
            P = (P @ level.P).tocsr()
        return P

    def composite_aggregates(self, start=0, stop=None):
        """AggregateSet on level start whose aggregate j is the preimage of
        index j of level stop."""
        if stop is None:
            stop = self.n_levels - 1
        agg_of = np.arange(self.levels[start].size)
        for level in self.levels[start:stop]:
            agg_of = level.aggregates.agg_of[agg_of]
        return AggregateSet(agg_of)

    def composite_complement(self, start=0, stop=None):
        """P_f of the composite aggregates, D taken on level start."""
        fine = self.levels[start]
        return complement_prolongator(
            self.composite_aggregates(start, stop), fine.w, fine.D)

    def __repr__(self):
        return 'Hierarchy(%s)' % ' > '.join(str(s) for s in self.sizes)


def _as_matcher(matcher):
    if isinstance(matcher, str):
        return get_matcher(matcher)
    if isinstance(matcher, Matcher) or callable(matcher):
        return matcher
    raise CoarseningError('not a matcher: %r' % (matcher,))


def coarsen_step(level, matcher):
    """Match on level, attach P and aggregates to it and return the next
    Level, or None when the matching has no pairs."""
    edge_weights = compute_edge_weights(level.A, level.w)
    matching = matcher(edge_weights)
    if not matching.converged:
        warnings.warn('matcher %r did not converge on a level of size %d' % (
            matcher, level.size))
    if matching.n_pairs == 0:
        return None
    prolongator, _ = build_prolongator(build_aggregates(matching), level.w,
                                       level.D)
    if prolongator.aggregates.n_pairs == 0:
        return None
    level.P = prolongator.P
    level.aggregates = prolongator.aggregates
    level.matching = matching
    coarse = Level(galerkin_product(prolongator.P, level.A),
                   prolongator.coarse_weight)
    logger.debug('sweep: %d -> %d (%d pairs)', level.size, coarse.size,
                 prolongator.aggregates.n_pairs)
    return coarse


def coarsen_sweeps(A, w, matcher, sweeps=1):
    """Apply sweeps rounds of matching and collapsing.

    Edge weights are recomputed from the coarse operator and coarse weight
    at every sweep.

    Args:
        A: SPD sparse matrix.
        w: weight vector.
        matcher: a Matcher, a callable on EdgeWeights, or a matcher name.
        sweeps: number of matching rounds, at least 1.

    Returns:
        A Hierarchy with one level per completed sweep plus the coarse one.
        If a sweep after the first finds no pairs the hierarchy stops there
        with a warning.
    """
    if sweeps < 1:
        raise CoarseningError('need at least one sweep, got %d' % sweeps)
    A = as_sparse_matrix(A)
    if A.shape[0] == 0:
        raise CoarseningError('cannot coarsen an empty matrix')
    w = np.asarray(w, dtype=float)
    if w.shape != (A.shape[0],):
        raise DimensionMismatchError(
            'weight vector of shape %s for a matrix of size %d' % (
                w.shape, A.shape[0]))
    matcher = _as_matcher(matcher)

    levels = [Level(A, w)]
    for sweep in range(sweeps):
        coarse = coarsen_step(levels[-1], matcher)
        if coarse is None:
            if sweep == 0:
                raise CoarseningError(
                    'the matching found no pairs; the coarse space would '
                    'not be smaller than the fine one')
            warnings.warn('sweep %d found no pairs; stopping after %d '
                          'sweeps' % (sweep + 1, sweep))
            break
        levels.append(coarse)
    return Hierarchy(levels)


def build_amg_hierarchy(A, w, matcher, sweeps=1, max_coarse=MAX_COARSE):
    """Multilevel hierarchy for V-cycles.

    Every level's prolongator is the composite of sweeps matching rounds.
    Coarsening stops once a level has at most max_coarse unknowns or cannot
    be reduced any further.
    """
    matcher = _as_matcher(matcher)
    A = as_sparse_matrix(A)
    levels = [Level(A, np.asarray(w, dtype=float))]
    while levels[-1].size > max_coarse:
        current = levels[-1]
        try:
            local = coarsen_sweeps(current.A, current.w, matcher, sweeps)
        except CoarseningError as exc:
            warnings.warn('coarsening stopped at size %d: %s' % (
                current.size, exc))
            break
        current.P = local.composite_prolongator()
        current.aggregates = local.composite_aggregates()
        current.matching = local.levels[0].matching
        levels.append(local.levels[-1])
    logger.info('AMG hierarchy sizes %s', [level.size for level in levels])
    return Hierarchy(levels)


def write_aggregate_csv(agg, path):
    """Write the aggregate map as (index, aggregate_id) rows."""
    write_csv(path, ('index', 'aggregate_id'),
              zip(range(agg.n), agg.agg_of.tolist()))


def read_aggregate_csv(path):
    """Read an aggregate map written by write_aggregate_csv."""
    header, rows = read_csv(path)
    if header[:2] != ['index', 'aggregate_id']:
        raise CoarseningError('%s: expected columns index, aggregate_id' %
                              path)
    try:
        pairs = sorted((int(index), int(agg_id)) for index, agg_id, *_ in rows)
    except ValueError as exc:
        raise CoarseningError('%s: %s' % (path, exc))
    if [index for index, _ in pairs] != list(range(len(pairs))):
        raise CoarseningError('%s: indices must be 0..n-1' % path)
    return AggregateSet([agg_id for _, agg_id in pairs])
