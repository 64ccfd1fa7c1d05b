"""Exact maximum weight matchings.

match_exact runs the blossom algorithm of networkx on the candidate edges.
The log weights are scaled to integers first so that networkx works in exact
integer arithmetic and its result does not depend on roundoff in the dual
updates. match_bruteforce enumerates all matchings of a small graph; it is
the oracle the other matchers are tested against.
"""
import functools
import logging

import networkx as nx

from amgmatch.matching import (
    InvalidMatcherParamsError, Matcher, Matching, MatchingError)

logger = logging.getLogger(__name__)

EXACT_EDGE_BUDGET = 20000
BRUTEFORCE_NODE_CAP = 16
INTEGER_WEIGHT_SCALE = 2 ** 40


class MatchingBudgetError(MatchingError):
    """Raise when a graph is too large for an exact matcher."""
    pass


def build_candidate_graph(edge_weights):
    """networkx Graph on vertices 0..n-1 with the candidate edges, weighted
    by their integer-scaled log weight, inserted in CSR order."""
    rows, cols, logw = edge_weights.candidates()
    graph = nx.Graph()
    graph.add_nodes_from(range(edge_weights.n))
    for i, j, weight in zip(rows.tolist(), cols.tolist(), logw.tolist()):
        scaled = int(round(weight * INTEGER_WEIGHT_SCALE))
        if scaled > 0:
            graph.add_edge(i, j, weight=scaled)
    return graph


def match_exact(edge_weights, edge_budget=EXACT_EDGE_BUDGET):
    """Maximum weight matching of the candidate edges (any cardinality)."""
    graph = build_candidate_graph(edge_weights)
    if graph.number_of_edges() > edge_budget:
        raise MatchingBudgetError(
            'exact matching limited to %d edges, graph has %d; use the '
            'suitor matcher instead' % (edge_budget, graph.number_of_edges()))
    logger.debug('blossom matching on %d vertices, %d edges',
                 graph.number_of_nodes(), graph.number_of_edges())
    matched = nx.max_weight_matching(graph, maxcardinality=False)
    pairs = sorted(tuple(sorted(edge)) for edge in matched)
    return Matching.from_pairs(edge_weights.n, pairs, edge_weights)


def match_bruteforce(edge_weights, node_cap=BRUTEFORCE_NODE_CAP):
    """Optimal matching by exhaustive search over the candidate edges."""
    n = edge_weights.n
    if n > node_cap:
        raise MatchingBudgetError(
            'brute force matching limited to %d vertices, got %d' % (
                node_cap, n))
    rows, cols, logw = edge_weights.candidates()
    neighbors = [[] for _ in range(n)]
    for i, j, weight in zip(rows.tolist(), cols.tolist(), logw.tolist()):
        neighbors[i].append((j, weight))

    @functools.lru_cache(maxsize=None)
    def best(used):
        """(value, pairs) of the best matching of the vertices not in used."""
        free = [v for v in range(n) if not used >> v & 1]
        if not free:
            return 0.0, ()
        u = free[0]
        value, pairs = best(used | 1 << u)
        for v, weight in neighbors[u]:
            if used >> v & 1:
                continue
            rest_value, rest_pairs = best(used | 1 << u | 1 << v)
            if rest_value + weight > value:
                value, pairs = rest_value + weight, ((u, v),) + rest_pairs
        return value, pairs

    _, pairs = best(0)
    return Matching.from_pairs(n, sorted(pairs), edge_weights)


class ExactMatcher(Matcher):
    name = 'exact'

    @staticmethod
    def validate_params(raw_params):
        params = dict(raw_params)
        budget = int(params.pop('edge_budget', EXACT_EDGE_BUDGET))
        if params:
            raise InvalidMatcherParamsError(
                'unexpected exact matcher parameters %s' % sorted(params))
        if budget < 0:
            raise InvalidMatcherParamsError('edge budget must be >= 0')
        return {'edge_budget': budget}

    def match(self, edge_weights):
        return match_exact(edge_weights, **self.params)


class BruteForceMatcher(Matcher):
    name = 'bruteforce'

    def match(self, edge_weights):
        return match_bruteforce(edge_weights)
