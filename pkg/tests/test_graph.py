import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scalemix.errors import InvalidParams, NotDecomposable
from scalemix.graph import (
    DecomposableGraph,
    EdgePriorWeights,
    clique_decomposition,
    graph_log_prior,
    graph_log_prior_delta,
    is_decomposable,
    propose_edge_move,
    read_adjacency_csv,
    read_edge_list,
    write_adjacency_csv,
    write_edge_list,
)


def banded_adjacency(q, bandwidth):
    adj = np.zeros((q, q), dtype=np.uint8)
    for i in range(q):
        for j in range(i + 1, min(i + bandwidth + 1, q)):
            adj[i, j] = adj[j, i] = 1
    return adj


def brute_force_is_peo(adj, order):
    """Oracle: check an ordering is a perfect elimination ordering directly."""
    q = adj.shape[0]
    pos = {v: k for k, v in enumerate(order)}
    for v in order:
        later = [u for u in range(q) if adj[v, u] and pos[u] > pos[v]]
        for a, b in itertools.combinations(later, 2):
            if not adj[a, b]:
                return False
    return True


def brute_force_maximal_cliques(adj):
    """Oracle: enumerate maximal cliques by exhaustive subset search (small q)."""
    q = adj.shape[0]
    cliques = []
    for r in range(1, q + 1):
        for sub in itertools.combinations(range(q), r):
            if all(adj[a, b] for a, b in itertools.combinations(sub, 2)):
                cliques.append(set(sub))
    return {tuple(sorted(c)) for c in cliques if not any(c < o for o in cliques)}


def random_decomposable(q, n_moves, rng):
    """Build a decomposable graph by random legal single-edge additions,
    guarded by the independent networkx chordality oracle."""
    adj = np.zeros((q, q), dtype=np.uint8)
    for _ in range(n_moves):
        u, v = rng.integers(q), rng.integers(q)
        if u == v or adj[u, v]:
            continue
        adj[u, v] = adj[v, u] = 1
        if not nx.is_chordal(nx.from_numpy_array(adj)):
            adj[u, v] = adj[v, u] = 0
    return adj


class TestIsDecomposable:
    def test_triangle(self):
        assert is_decomposable(np.ones((3, 3)) - np.eye(3))

    def test_four_cycle(self):
        adj = np.zeros((4, 4))
        for a, b in [(0, 1), (1, 2), (2, 3), (3, 0)]:
            adj[a, b] = adj[b, a] = 1
        assert not is_decomposable(adj)

    def test_banded_q50_bw2(self):
        adj = banded_adjacency(50, 2)
        assert is_decomposable(adj)
        # independent oracle: the natural vertex ordering is a PEO
        assert brute_force_is_peo(adj, list(range(50)))

    def test_matches_networkx_on_random_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            q = int(rng.integers(2, 9))
            adj = np.zeros((q, q), dtype=np.uint8)
            for u in range(q):
                for v in range(u + 1, q):
                    if rng.random() < 0.4:
                        adj[u, v] = adj[v, u] = 1
            assert is_decomposable(adj) == nx.is_chordal(nx.from_numpy_array(adj))


class TestCliqueDecomposition:
    def test_empty_graph(self):
        g = DecomposableGraph.empty(5)
        assert [set(c) for c in g.clique_seq] == [{i} for i in range(5)]
        assert all(len(s) == 0 for s in g.separators)

    def test_complete_graph(self):
        g = DecomposableGraph.complete(6)
        assert len(g.clique_seq) == 1
        assert set(g.clique_seq[0]) == set(range(6))

    def test_path_three(self):
        g = DecomposableGraph.from_edges(3, [(0, 1), (1, 2)])
        assert sorted(set(c) for c in g.clique_seq) == [{0, 1}, {1, 2}]
        assert [set(s) for s in g.separators] == [{1}]
        # oracle: brute-force maximal clique enumeration
        assert {tuple(c) for c in g.clique_seq} == brute_force_maximal_cliques(g.adjacency)

    def test_not_decomposable_raises(self):
        adj = np.zeros((4, 4))
        for a, b in [(0, 1), (1, 2), (2, 3), (3, 0)]:
            adj[a, b] = adj[b, a] = 1
        with pytest.raises(NotDecomposable):
            clique_decomposition(adj)

    def test_running_intersection_and_edge_reconstruction(self):
        rng = np.random.default_rng(3)
        for trial in range(40):
            q = int(rng.integers(2, 11))
            adj = random_decomposable(q, 3 * q, rng)
            g = DecomposableGraph.from_adjacency(adj)
            # maximal cliques match the brute-force oracle
            assert {tuple(c) for c in g.clique_seq} == brute_force_maximal_cliques(adj)
            # running intersection property
            seen: set[int] = set(g.clique_seq[0])
            for j in range(1, len(g.clique_seq)):
                s = set(g.clique_seq[j]) & seen
                assert s == set(g.separators[j - 1])
                assert not s or any(s <= set(c) for c in g.clique_seq[:j])
                seen |= set(g.clique_seq[j])
            # edges reconstruct exactly from the cliques
            rebuilt = np.zeros_like(adj)
            for c in g.clique_seq:
                for a, b in itertools.combinations(c, 2):
                    rebuilt[a, b] = rebuilt[b, a] = 1
            assert np.array_equal(rebuilt, adj)

    def test_decomposition_deterministic(self):
        adj = banded_adjacency(12, 2)
        g1 = DecomposableGraph.from_adjacency(adj)
        g2 = DecomposableGraph.from_adjacency(adj)
        assert g1.clique_seq == g2.clique_seq
        assert g1.separators == g2.separators


class TestLegalMoves:
    def test_exhaustive_against_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            q = int(rng.integers(3, 10))
            adj = random_decomposable(q, 3 * q, rng)
            g = DecomposableGraph.from_adjacency(adj)
            adds = {tuple(e) for e in g.legal_additions()}
            dels = {tuple(e) for e in g.legal_deletions()}
            for u in range(q):
                for v in range(u + 1, q):
                    mod = adj.copy()
                    mod[u, v] = mod[v, u] = 1 - mod[u, v]
                    ok = nx.is_chordal(nx.from_numpy_array(mod))
                    if adj[u, v]:
                        assert ((u, v) in dels) == ok
                    else:
                        assert ((u, v) in adds) == ok


class TestProposeEdgeMove:
    def test_empty_graph_always_adds(self):
        rng = np.random.default_rng(0)
        g = DecomposableGraph.empty(5)
        new, move = propose_edge_move(g, rng=rng)
        assert move.kind == "add"
        assert new.num_edges == 1

    def test_complete_graph_always_deletes(self):
        rng = np.random.default_rng(0)
        g = DecomposableGraph.complete(5)
        new, move = propose_edge_move(g, rng=rng)
        assert move.kind == "delete"
        assert new.num_edges == g.num_edges - 1

    def test_long_walk_stays_decomposable(self):
        # property test with the independent networkx checker
        rng = np.random.default_rng(123)
        g = DecomposableGraph.empty(8)
        for step in range(10_000):
            g, _ = propose_edge_move(g, rng=rng)
            if step % 250 == 0:
                assert nx.is_chordal(nx.from_numpy_array(g.adjacency))
        assert nx.is_chordal(nx.from_numpy_array(g.adjacency))

    def test_reversibility_and_reported_probabilities(self):
        rng = np.random.default_rng(5)
        g = DecomposableGraph.from_adjacency(random_decomposable(7, 20, rng))
        for _ in range(200):
            new, move = propose_edge_move(g, rng=rng)
            # recompute both directions from scratch
            n_add, n_del = len(g.legal_additions()), len(g.legal_deletions())
            r_add, r_del = len(new.legal_additions()), len(new.legal_deletions())
            side = math.log(0.5) if (n_add and n_del) else 0.0
            rside = math.log(0.5) if (r_add and r_del) else 0.0
            if move.kind == "add":
                assert move.log_q_forward == pytest.approx(side - math.log(n_add))
                assert move.log_q_reverse == pytest.approx(rside - math.log(r_del))
                assert tuple(sorted(move.edge)) in {tuple(e) for e in new.legal_deletions()}
            else:
                assert move.log_q_forward == pytest.approx(side - math.log(n_del))
                assert move.log_q_reverse == pytest.approx(rside - math.log(r_add))
                assert tuple(sorted(move.edge)) in {tuple(e) for e in new.legal_additions()}
            g = new


class TestGraphLogPrior:
    def test_empty_graph_half_weights(self):
        g = DecomposableGraph.empty(3)
        w = EdgePriorWeights.constant(3, 0.5)
        assert graph_log_prior(g, w) == pytest.approx(3 * math.log(0.5))

    def test_single_edge(self):
        g = DecomposableGraph.from_edges(3, [(0, 1)])
        w = EdgePriorWeights.constant(3, 0.1)
        assert graph_log_prior(g, w) == pytest.approx(math.log(0.1) + 2 * math.log(0.9))

    def test_move_delta_matches_full_difference(self):
        rng = np.random.default_rng(9)
        wmat = rng.uniform(0.05, 0.95, size=(6, 6))
        wmat = (wmat + wmat.T) / 2
        w = EdgePriorWeights(wmat)
        g = DecomposableGraph.from_adjacency(random_decomposable(6, 12, rng))
        adds = g.legal_additions()
        if len(adds):
            u, v = map(int, adds[0])
            g2 = g.with_edge(u, v)
            full = graph_log_prior(g2, w) - graph_log_prior(g, w)
            assert graph_log_prior_delta(w, u, v, add=True) == pytest.approx(full)
        # delta for w_e = 0.1 equals log(1/9)
        w01 = EdgePriorWeights.constant(6, 0.1)
        assert graph_log_prior_delta(w01, 0, 1, add=True) == pytest.approx(math.log(1 / 9))

    def test_invalid_weights_rejected(self):
        with pytest.raises(InvalidParams):
            EdgePriorWeights(np.full((3, 3), 1.0))
        with pytest.raises(InvalidParams):
            EdgePriorWeights(np.array([[0.5, 0.2], [0.3, 0.5]]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=18))
def test_decompose_agrees_with_networkx(pairs):
    adj = np.zeros((7, 7), dtype=np.uint8)
    for u, v in pairs:
        if u != v:
            adj[u, v] = adj[v, u] = 1
    ours = is_decomposable(adj)
    assert ours == nx.is_chordal(nx.from_numpy_array(adj))
    if ours:
        g = DecomposableGraph.from_adjacency(adj)
        assert {tuple(c) for c in g.clique_seq} == brute_force_maximal_cliques(adj)


class TestIO:
    def test_edge_list_round_trip(self, tmp_path):
        g = DecomposableGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
        p = tmp_path / "g.txt"
        write_edge_list(g, p)
        g2 = read_edge_list(p, 5)
        assert g2.edges == g.edges

    def test_adjacency_csv_round_trip(self, tmp_path):
        g = DecomposableGraph.from_edges(4, [(0, 1), (1, 2)])
        p = tmp_path / "g.csv"
        write_adjacency_csv(g, p)
        g2 = read_adjacency_csv(p)
        assert np.array_equal(g2.adjacency, g.adjacency)
