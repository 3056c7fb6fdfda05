"""Decomposable undirected graphs with junction-tree bookkeeping.

Graphs are immutable: every move returns a new object.  The clique sequence
is kept in perfect order (running intersection property), so hyper-Markov
quantities can factorize over cliques and separators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .backend import core
from .errors import DimensionMismatch, InvalidParams, NoLegalMove, NotDecomposable

Edge = tuple[int, int]


def _as_adjacency(obj) -> np.ndarray:
    if isinstance(obj, DecomposableGraph):
        return obj.adjacency
    a = np.asarray(obj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"adjacency must be square, got {a.shape}")
    a = (a != 0).astype(np.uint8)
    if not np.array_equal(a, a.T):
        raise InvalidParams("adjacency must be symmetric")
    np.fill_diagonal(a, 0)
    return np.ascontiguousarray(a)


def is_decomposable(adjacency) -> bool:
    """True iff the graph admits a perfect elimination ordering."""
    return bool(core.is_chordal(_as_adjacency(adjacency)))


@dataclass(frozen=True)
class DecomposableGraph:
    """Undirected decomposable graph with a maintained perfect clique sequence.

    ``clique_seq`` and ``separators`` satisfy the running intersection
    property; ``separators[j]`` belongs to ``clique_seq[j + 1]``.
    """

    num_vertices: int
    adjacency: np.ndarray
    clique_seq: tuple[tuple[int, ...], ...]
    separators: tuple[tuple[int, ...], ...]

    @classmethod
    def from_adjacency(cls, adjacency) -> "DecomposableGraph":
        adj = _as_adjacency(adjacency)
        result = core.decompose(adj)
        if result is None:
            raise NotDecomposable("graph is not decomposable")
        cliques, seps = result
        adj.setflags(write=False)
        return cls(
            num_vertices=adj.shape[0],
            adjacency=adj,
            clique_seq=tuple(tuple(c) for c in cliques),
            separators=tuple(tuple(s) for s in seps),
        )

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Iterable[Edge]) -> "DecomposableGraph":
        adj = np.zeros((num_vertices, num_vertices), dtype=np.uint8)
        for u, v in edges:
            if u == v or not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise InvalidParams(f"bad edge ({u}, {v})")
            adj[u, v] = adj[v, u] = 1
        return cls.from_adjacency(adj)

    @classmethod
    def empty(cls, num_vertices: int) -> "DecomposableGraph":
        return cls.from_edges(num_vertices, [])

    @classmethod
    def complete(cls, num_vertices: int) -> "DecomposableGraph":
        edges = [(u, v) for u in range(num_vertices) for v in range(u + 1, num_vertices)]
        return cls.from_edges(num_vertices, edges)

    @property
    def edges(self) -> frozenset[Edge]:
        iu, iv = np.nonzero(np.triu(self.adjacency, 1))
        return frozenset((int(a), int(b)) for a, b in zip(iu, iv))

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u, v])

    def with_edge(self, u: int, v: int) -> "DecomposableGraph":
        if self.has_edge(u, v):
            raise InvalidParams(f"edge ({u}, {v}) already present")
        adj = self.adjacency.copy()
        adj[u, v] = adj[v, u] = 1
        return DecomposableGraph.from_adjacency(adj)

    def without_edge(self, u: int, v: int) -> "DecomposableGraph":
        if not self.has_edge(u, v):
            raise InvalidParams(f"edge ({u}, {v}) not present")
        adj = self.adjacency.copy()
        adj[u, v] = adj[v, u] = 0
        return DecomposableGraph.from_adjacency(adj)

    def legal_additions(self) -> np.ndarray:
        """All (u, v), u < v, whose addition keeps the graph decomposable."""
        return core.legal_adds(self.adjacency)

    def legal_deletions(self) -> np.ndarray:
        """All edges lying in exactly one maximal clique (legal removals)."""
        counts: dict[Edge, int] = {}
        for clique in self.clique_seq:
            for i, u in enumerate(clique):
                for v in clique[i + 1 :]:
                    counts[(u, v)] = counts.get((u, v), 0) + 1
        out = sorted(e for e, c in counts.items() if c == 1)
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def key(self) -> bytes:
        """Canonical hashable identity (adjacency bytes)."""
        return self.adjacency.tobytes()


def clique_decomposition(graph) -> tuple[list[tuple[int, ...]], list[tuple[int, ...]]]:
    """Perfect clique sequence and separators of a decomposable graph."""
    if isinstance(graph, DecomposableGraph):
        return list(graph.clique_seq), list(graph.separators)
    g = DecomposableGraph.from_adjacency(graph)
    return list(g.clique_seq), list(g.separators)


@dataclass(frozen=True)
class EdgePriorWeights:
    """Symmetric per-pair edge inclusion weights, strictly inside (0, 1)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch(f"weights must be square, got {w.shape}")
        if not np.allclose(w, w.T):
            raise InvalidParams("weights must be symmetric")
        off = w[~np.eye(w.shape[0], dtype=bool)]
        if off.size and (off.min() <= 0.0 or off.max() >= 1.0):
            raise InvalidParams("weights must lie strictly inside (0, 1)")
        object.__setattr__(self, "w", w)

    @classmethod
    def constant(cls, num_vertices: int, w: float) -> "EdgePriorWeights":
        return cls(np.full((num_vertices, num_vertices), float(w)))


def graph_log_prior(graph: DecomposableGraph, weights: EdgePriorWeights) -> float:
    """Edge-wise Bernoulli log prior, up to the constant over the graph space."""
    w = weights.w
    if w.shape[0] != graph.num_vertices:
        raise DimensionMismatch("weights size does not match graph")
    adj = graph.adjacency
    iu = np.triu_indices(graph.num_vertices, 1)
    present = adj[iu].astype(bool)
    return float(np.log(w[iu][present]).sum() + np.log1p(-w[iu][~present]).sum())


def graph_log_prior_delta(weights: EdgePriorWeights, u: int, v: int, add: bool) -> float:
    """Prior log-ratio of a single-edge move: +/- log(w / (1 - w))."""
    w = float(weights.w[u, v])
    delta = math.log(w) - math.log1p(-w)
    return delta if add else -delta


@dataclass(frozen=True)
class MoveDescriptor:
    """Bookkeeping for one proposed single-edge move."""

    kind: str  # "add" or "delete"
    edge: Edge
    log_q_forward: float
    log_q_reverse: float


def propose_edge_move(graph: DecomposableGraph, weights=None, rng=None):
    """Propose a single-edge move that preserves decomposability.

    Picks the add/delete direction with probability 1/2 each (all mass on the
    nonempty side in degenerate cases) and then uniformly among the legal
    moves of that direction.  ``weights`` is accepted for interface parity
    with the prior but does not shape the proposal.  Returns the new graph
    and a :class:`MoveDescriptor` carrying both proposal log-probabilities.
    """
    if rng is None:
        raise ValueError("an explicit numpy Generator is required")
    adds = graph.legal_additions()
    dels = graph.legal_deletions()
    n_add, n_del = len(adds), len(dels)
    if n_add == 0 and n_del == 0:
        raise NoLegalMove("no single-edge move preserves decomposability")

    if n_add and n_del:
        go_add = rng.random() < 0.5
        log_side = math.log(0.5)
    else:
        go_add = n_add > 0
        log_side = 0.0

    if go_add:
        u, v = map(int, adds[rng.integers(n_add)])
        new = graph.with_edge(u, v)
        log_fwd = log_side - math.log(n_add)
        kind = "add"
    else:
        u, v = map(int, dels[rng.integers(n_del)])
        new = graph.without_edge(u, v)
        log_fwd = log_side - math.log(n_del)
        kind = "delete"

    r_add, r_del = len(new.legal_additions()), len(new.legal_deletions())
    log_rside = math.log(0.5) if (r_add and r_del) else 0.0
    log_rev = log_rside - math.log(r_del if go_add else r_add)
    return new, MoveDescriptor(kind=kind, edge=(u, v), log_q_forward=log_fwd,
                               log_q_reverse=log_rev)


# ---------------------------------------------------------------------------
# file formats: edge-list text and 0/1 adjacency CSV


def write_edge_list(graph: DecomposableGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v in sorted(graph.edges):
            fh.write(f"{u} {v}\n")


def read_edge_list(path, num_vertices: int) -> DecomposableGraph:
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidParams(f"{path}:{lineno}: expected 'u v'")
            edges.append((int(parts[0]), int(parts[1])))
    return DecomposableGraph.from_edges(num_vertices, edges)


def write_adjacency_csv(graph: DecomposableGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in graph.adjacency:
            fh.write(",".join(str(int(x)) for x in row) + "\n")


def read_adjacency_csv(path) -> DecomposableGraph:
    adj = np.loadtxt(path, delimiter=",", dtype=np.int64)
    if adj.ndim == 0:
        adj = adj.reshape(1, 1)
    return DecomposableGraph.from_adjacency(adj)
