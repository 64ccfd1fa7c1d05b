"""Half-approximate maximum weight matchings.

In this file:

functions:
    match_suitor:
        the suitor algorithm; every vertex proposes to its heaviest neighbour
        that would accept it, displacing weaker suitors.
    match_preis:
        locally dominant edges found by following candidate pointers.
    match_auction:
        a forward auction on the vertex-to-vertex assignment problem, turned
        into a matching.

All three work on the log weights of the candidate edges and break ties with
edge_key, so their output is fully determined by the input. With a strict
total order on the edges the locally dominant matching is unique, so suitor
and Preis return the same matching; they differ in how they find it.
"""
import collections
import logging
import warnings

import numpy as np

from amgmatch.matching import (
    UNMATCHED, InvalidMatcherParamsError, Matcher, Matching, edge_key,
    matching_objective)

logger = logging.getLogger(__name__)

AUCTION_EPSILON = 1e-2
# The auction gives up after this many bids per vertex.
AUCTION_BID_FACTOR = 50


def _best_neighbor(u, indptr, indices, logw, available):
    """Heaviest candidate neighbour v of u with available(v), or UNMATCHED."""
    best, best_key = UNMATCHED, None
    for k in range(indptr[u], indptr[u + 1]):
        v = indices[k]
        if not available(v):
            continue
        key = edge_key(logw[k], u, v)
        if best_key is None or key > best_key:
            best, best_key = v, key
    return best


def match_suitor(edge_weights):
    """Suitor matching.

    Vertices are processed in index order. A vertex proposes to the neighbour
    whose edge beats the neighbour's current suitor; a displaced suitor
    proposes again at once.
    """
    n = edge_weights.n
    indptr, indices, logw = edge_weights.candidate_graph()
    suitor = [UNMATCHED] * n
    offer = [None] * n

    for u in range(n):
        current = u
        while current != UNMATCHED:
            partner, heaviest = UNMATCHED, None
            for k in range(indptr[current], indptr[current + 1]):
                v = indices[k]
                key = edge_key(logw[k], current, v)
                if (heaviest is None or key > heaviest) and (
                        offer[v] is None or key > offer[v]):
                    partner, heaviest = v, key
            if partner == UNMATCHED:
                break
            displaced = suitor[partner]
            suitor[partner] = current
            offer[partner] = heaviest
            current = displaced

    pairs = [(u, suitor[u]) for u in range(n)
             if suitor[u] > u and suitor[suitor[u]] == u]
    return Matching.from_pairs(n, pairs, edge_weights)


def match_preis(edge_weights):
    """Locally dominant matching.

    Each vertex points at its heaviest unmatched neighbour; two vertices that
    point at each other are matched, and the vertices that pointed at either
    of them look again.
    """
    n = edge_weights.n
    indptr, indices, logw = edge_weights.candidate_graph()
    mate = [UNMATCHED] * n

    def available(v):
        return mate[v] == UNMATCHED

    candidate = [_best_neighbor(u, indptr, indices, logw, available)
                 for u in range(n)]
    queue = collections.deque(range(n))
    while queue:
        u = queue.popleft()
        if mate[u] != UNMATCHED:
            continue
        c = candidate[u]
        if c != UNMATCHED and mate[c] != UNMATCHED:
            c = candidate[u] = _best_neighbor(u, indptr, indices, logw,
                                              available)
        if c == UNMATCHED or candidate[c] != u:
            continue
        mate[u], mate[c] = c, u
        for x in (u, c):
            for k in range(indptr[x], indptr[x + 1]):
                y = indices[k]
                if mate[y] == UNMATCHED and candidate[y] in (u, c):
                    queue.append(y)

    pairs = [(u, mate[u]) for u in range(n) if mate[u] > u]
    return Matching.from_pairs(n, pairs, edge_weights)


def _auction_assignment(n, indptr, indices, logw, epsilon, max_bids):
    """Forward auction where bidder i may take vertex j over a candidate
    edge or its own private dummy object of value 0.

    Returns (owner_of, converged): owner_of[i] is the vertex bidder i holds,
    UNMATCHED for its dummy or when the auction stopped early.
    """
    price = [0.0] * n
    holder = [UNMATCHED] * n        # bidder holding vertex j
    assigned = [None] * n           # vertex held by bidder i, UNMATCHED=dummy
    queue = collections.deque(range(n))
    bids = 0
    while queue:
        if bids >= max_bids:
            return [UNMATCHED if a is None else a for a in assigned], False
        i = queue.popleft()
        # the dummy is worth 0 and its price never moves
        best, best_value, second_value = UNMATCHED, 0.0, None
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            value = logw[k] - price[j]
            if value > best_value or (value == best_value and
                                      best != UNMATCHED and j < best):
                second_value = best_value
                best, best_value = j, value
            elif second_value is None or value > second_value:
                second_value = value
        if best == UNMATCHED:
            assigned[i] = UNMATCHED
            continue
        if second_value is None:
            second_value = 0.0
        price[best] += best_value - second_value + epsilon
        previous = holder[best]
        holder[best] = i
        assigned[i] = best
        bids += 1
        if previous != UNMATCHED:
            assigned[previous] = None
            queue.append(previous)
    return assigned, True


def _path_matching(weights):
    """Indices of a maximum weight set of non-adjacent edges on a path whose
    consecutive edges have the given weights."""
    taken, skipped = 0.0, 0.0
    take_choice, skip_choice = [], []
    for k, wk in enumerate(weights):
        new_taken = skipped + wk
        if taken >= skipped:
            new_skipped, new_skip_choice = taken, take_choice
        else:
            new_skipped, new_skip_choice = skipped, skip_choice
        take_choice = skip_choice + [k]
        skip_choice = new_skip_choice
        taken, skipped = new_taken, new_skipped
    return take_choice if taken > skipped else skip_choice


def _best_on_components(n, edges):
    """Maximum weight matching of a graph of maximum degree two.

    Args:
        edges: dict {(i, j): logw} with i < j.

    Returns:
        list of matched (i, j).
    """
    adjacency = collections.defaultdict(list)
    for (i, j) in sorted(edges):
        adjacency[i].append(j)
        adjacency[j].append(i)

    def weight(a, b):
        return edges[(min(a, b), max(a, b))]

    seen = set()
    chosen = []

    def walk(start):
        order = [start]
        seen.add(start)
        previous, current = None, start
        while True:
            following = [v for v in adjacency[current] if v != previous]
            if not following or following[0] in seen:
                return order, bool(following) and following[0] == start
            previous, current = current, following[0]
            order.append(current)
            seen.add(current)

    starts = [v for v in sorted(adjacency) if len(adjacency[v]) == 1]
    starts += [v for v in sorted(adjacency) if len(adjacency[v]) == 2]
    for start in starts:
        if start in seen:
            continue
        order, closed = walk(start)
        steps = list(zip(order[:-1], order[1:]))
        if closed:
            steps.append((order[-1], order[0]))
            # a cycle leaves out either its first or its last edge
            head = _path_matching([weight(a, b) for a, b in steps[:-1]])
            tail = [k + 1 for k in _path_matching(
                [weight(a, b) for a, b in steps[1:]])]
            head_sum = sum(weight(*steps[k]) for k in head)
            tail_sum = sum(weight(*steps[k]) for k in tail)
            picked = head if head_sum >= tail_sum else tail
        else:
            picked = _path_matching([weight(a, b) for a, b in steps])
        chosen.extend(tuple(sorted(steps[k])) for k in picked)
    return chosen


def match_auction(edge_weights, epsilon=AUCTION_EPSILON):
    """Auction based matching.

    Every vertex bids for a neighbour (or keeps nothing) in a forward auction
    with bid increment epsilon times the largest log weight. The assignment
    links each vertex to at most one other and is held by at most one, so its
    edges form paths and cycles; the best matching of those is taken and then
    extended greedily by the remaining candidate edges, heaviest first.

    A converged auction is within n * epsilon of the optimal assignment, and
    the matching read off it keeps at least half of that assignment's weight.
    """
    if not epsilon > 0:
        raise InvalidMatcherParamsError(
            'auction epsilon must be positive, got %g' % epsilon)
    n = edge_weights.n
    indptr, indices, logw = edge_weights.candidate_graph()
    if not logw:
        return Matching.from_pairs(n, [], edge_weights)
    step = epsilon * max(logw)
    assigned, converged = _auction_assignment(
        n, indptr, indices, logw, step, AUCTION_BID_FACTOR * n)
    if not converged:
        warnings.warn('auction stopped after %d bids without settling' %
                      (AUCTION_BID_FACTOR * n))

    rows, cols, weights = edge_weights.candidates()
    lookup = dict(zip(zip(rows.tolist(), cols.tolist()), weights.tolist()))
    links = {}
    for i, j in enumerate(assigned):
        if j is not None and j != UNMATCHED:
            key = (min(i, j), max(i, j))
            links[key] = lookup[key]
    pairs = _best_on_components(n, links)

    mate = np.full(n, UNMATCHED, dtype=np.int64)
    for i, j in pairs:
        mate[i], mate[j] = j, i
    order = sorted(range(len(weights)), reverse=True,
                   key=lambda k: edge_key(weights[k], rows[k], cols[k]))
    for k in order:
        i, j = rows[k], cols[k]
        if mate[i] == UNMATCHED and mate[j] == UNMATCHED:
            mate[i], mate[j] = j, i
    logger.debug('auction matched %d of %d vertices',
                 np.count_nonzero(mate != UNMATCHED), n)
    return Matching(mate, matching_objective(edge_weights, mate), converged)


class SuitorMatcher(Matcher):
    name = 'suitor'

    def match(self, edge_weights):
        return match_suitor(edge_weights)


class PreisMatcher(Matcher):
    name = 'preis'

    def match(self, edge_weights):
        return match_preis(edge_weights)


class AuctionMatcher(Matcher):
    name = 'auction'

    @staticmethod
    def validate_params(raw_params):
        params = dict(raw_params)
        epsilon = float(params.pop('epsilon', AUCTION_EPSILON))
        if params:
            raise InvalidMatcherParamsError(
                'unexpected auction parameters %s' % sorted(params))
        if not epsilon > 0:
            raise InvalidMatcherParamsError(
                'auction epsilon must be positive, got %g' % epsilon)
        return {'epsilon': epsilon}

    def match(self, edge_weights):
        return match_auction(edge_weights, **self.params)
