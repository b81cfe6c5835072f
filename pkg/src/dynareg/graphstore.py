"""Dynamic undirected graph with an incrementally maintained embedding.

Each node's embedding row lists the ids of its ``m`` nearest nodes,
nearest first with ties broken by smaller id, padded with the sentinel 0
when fewer than ``m`` nodes are reachable.  Graph mutations are
decomposed into one-hot rank-one row patches against the embedding
matrix.  A pruned breadth-first walk bounds the set of rows that a
single edge change can touch; correctness does not depend on the pruning
because candidate rows are recomputed and only real changes are emitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np

__all__ = [
    "DynamicGraph",
    "EmbeddingMatrix",
    "UpdateVectorPair",
    "GraphDelta",
    "mnn_embed_node",
    "build_embedding",
    "affected_candidates_insert",
    "affected_candidates_delete",
    "delta_for_edge",
    "delta_for_node_insert",
    "delta_for_node_delete",
]

#: Default cap on the number of edges touched by a single node change.
DEFAULT_NODE_EDGE_CAP = 16


class DynamicGraph:
    """Undirected simple graph over positive integer node ids.

    Node insertion order fixes the row order of the embedding matrix;
    deleting a node shifts every later row up by one.  Self-loops and
    duplicate edges are rejected.
    """

    def __init__(self):
        self._adj: dict[int, set[int]] = {}
        self._index: dict[int, int] = {}
        self._order: list[int] = []

    def __len__(self) -> int:
        return len(self._order)

    @property
    def node_ids(self) -> list[int]:
        """Node ids in row order."""
        return list(self._order)

    def has_node(self, v: int) -> bool:
        return v in self._adj

    def has_edge(self, u: int, v: int) -> bool:
        return u in self._adj and v in self._adj[u]

    def neighbors(self, v: int) -> set[int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def index_of(self, v: int) -> int:
        """Row index of node ``v``."""
        return self._index[v]

    def node_at(self, i: int) -> int:
        return self._order[i]

    def edges(self) -> list[tuple[int, int]]:
        """Canonical edge list: each edge once as (small id, large id), sorted."""
        out = []
        for u, nbrs in self._adj.items():
            for v in nbrs:
                if u < v:
                    out.append((u, v))
        out.sort()
        return out

    def add_node(self, v: int) -> None:
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v <= 0:
            raise ValueError("node ids must be positive integers, got %r" % (v,))
        v = int(v)
        if v in self._adj:
            raise ValueError("node %d already present" % v)
        self._adj[v] = set()
        self._index[v] = len(self._order)
        self._order.append(v)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError("self-loop at node %r rejected" % (u,))
        for w in (u, v):
            if w not in self._adj:
                raise ValueError("node %r does not exist" % (w,))
        if v in self._adj[u]:
            raise ValueError("edge %d-%d already present" % (u, v))
        self._adj[u].add(v)
        self._adj[v].add(u)

    def remove_edge(self, u: int, v: int) -> None:
        if u not in self._adj or v not in self._adj[u]:
            raise ValueError("edge %r-%r does not exist" % (u, v))
        self._adj[u].discard(v)
        self._adj[v].discard(u)

    def remove_node(self, v: int) -> None:
        """Remove a node along with any incident edges; later rows shift up."""
        if v not in self._adj:
            raise ValueError("node %r does not exist" % (v,))
        for w in list(self._adj[v]):
            self._adj[w].discard(v)
        del self._adj[v]
        self._order.remove(v)
        self._index = {w: i for i, w in enumerate(self._order)}

    def copy(self) -> "DynamicGraph":
        g = DynamicGraph()
        g._adj = {v: set(nbrs) for v, nbrs in self._adj.items()}
        g._index = dict(self._index)
        g._order = list(self._order)
        return g


class EmbeddingMatrix:
    """Dense (n, m) float64 matrix of embedding rows, one per node in row order.

    Entries are node ids (integer valued) with 0 as the padding sentinel.
    """

    def __init__(self, m: int, rows: Optional[np.ndarray] = None):
        self.m = int(m)
        if rows is None:
            rows = np.zeros((0, self.m))
        self.rows = np.asarray(rows, dtype=np.float64)

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.m, self.rows.copy())


class UpdateVectorPair(NamedTuple):
    """One-hot rank-one patch of the embedding matrix.

    Row ``c_index`` changes by the delta vector ``d``; the implied left
    factor is the unit vector with a single 1 at ``c_index``.
    """

    c_index: int
    d: np.ndarray


@dataclass
class GraphDelta:
    """Record of one graph mutation decomposed into row patches.

    ``candidate_ids`` is the superset of node ids examined for row
    changes, kept for diagnostics and soundness tests.  The optional
    fields are populated per kind: node inserts carry ``new_row`` and
    ``measured_value``, node deletes carry ``removed_row`` and the
    pre-removal ``node_index``; node delete pairs are expressed in
    post-shift row indexing.
    """

    kind: str
    pairs: list[UpdateVectorPair]
    candidate_ids: set = field(default_factory=set)
    new_row: Optional[np.ndarray] = None
    removed_row: Optional[np.ndarray] = None
    measured_value: Optional[float] = None
    node_id: Optional[int] = None
    node_index: Optional[int] = None


def mnn_embed_node(g: DynamicGraph, v: int, m: int) -> np.ndarray:
    """Embedding row of one node: the ids of its ``m`` nearest nodes.

    Nodes are ranked by breadth-first distance from ``v`` with ties
    broken by smaller id; missing slots get the sentinel 0.
    """
    if m < 1:
        raise ValueError("embedding width must be positive, got %d" % m)
    if not g.has_node(v):
        raise ValueError("node %r does not exist" % (v,))
    row: list[int] = []
    visited = {v}
    frontier: Iterable[int] = (v,)
    while len(row) < m:
        level: set[int] = set()
        for x in frontier:
            for y in g.neighbors(x):
                if y not in visited:
                    visited.add(y)
                    level.add(y)
        if not level:
            break
        for y in sorted(level):
            if len(row) == m:
                break
            row.append(y)
        frontier = level
    row.extend([0] * (m - len(row)))
    return np.asarray(row, dtype=np.float64)


def build_embedding(g: DynamicGraph, m: int) -> EmbeddingMatrix:
    """Embedding matrix built from scratch, one row per node in row order."""
    rows = np.zeros((len(g), m))
    for i, v in enumerate(g.node_ids):
        rows[i] = mnn_embed_node(g, v, m)
    return EmbeddingMatrix(m, rows)


def _pruned_reach(g: DynamicGraph, root: int, gate: int, m: int) -> set[int]:
    # Walk outward from root with the first step forced through gate.
    # Beyond the gate, nodes of degree above m are recorded but not
    # expanded, and the walk never leaves distance m.  The gate itself is
    # always expanded: at distance 1 the blocking argument behind the
    # degree rule has no slack for ties, so skipping it would be unsound.
    met = {gate}
    visited = {root, gate}
    frontier = [gate]
    depth = 1
    while frontier and depth < m:
        nxt = []
        for x in frontier:
            if depth > 1 and g.degree(x) > m:
                continue
            for y in g.neighbors(x):
                if y not in visited:
                    visited.add(y)
                    met.add(y)
                    nxt.append(y)
        frontier = nxt
        depth += 1
    return met


def affected_candidates_insert(g: DynamicGraph, u: int, v: int, m: int) -> set[int]:
    """Superset of nodes whose row can change after inserting edge (u, v).

    ``g`` must already contain the edge.  Runs the pruned walk from each
    endpoint through the other and always includes both endpoints.
    """
    if not g.has_edge(u, v):
        raise ValueError("edge %r-%r not present in the updated graph" % (u, v))
    return {u, v} | _pruned_reach(g, v, u, m) | _pruned_reach(g, u, v, m)


def affected_candidates_delete(g: DynamicGraph, u: int, v: int, m: int) -> set[int]:
    """Superset of nodes whose row can change after deleting edge (u, v).

    ``g`` is the graph before the deletion, with the edge still present.
    """
    if not g.has_edge(u, v):
        raise ValueError("edge %r-%r not present before deletion" % (u, v))
    return {u, v} | _pruned_reach(g, v, u, m) | _pruned_reach(g, u, v, m)


def _repair_rows(g: DynamicGraph, candidate_ids: set[int],
                 emb: EmbeddingMatrix) -> list[UpdateVectorPair]:
    # Recompute candidate rows and emit patches only for real changes,
    # in ascending row order; emb is patched in place.
    pairs = []
    indexed = sorted((g.index_of(w), w) for w in candidate_ids if g.has_node(w))
    for i, w in indexed:
        new_row = mnn_embed_node(g, w, emb.m)
        if not np.array_equal(new_row, emb.rows[i]):
            pairs.append(UpdateVectorPair(i, new_row - emb.rows[i]))
            emb.rows[i] = new_row
    return pairs


def delta_for_edge(g: DynamicGraph, op: str, u: int, v: int,
                   emb: EmbeddingMatrix) -> GraphDelta:
    """Insert or delete one edge, patching ``emb`` in place.

    ``op`` is ``"insert"`` or ``"delete"``.  The returned pairs, applied
    to the previous matrix, reproduce a from-scratch rebuild of the new
    one; they are emitted in ascending row order and only for rows whose
    content actually changed.
    """
    if op == "insert":
        g.add_edge(u, v)
        cand = affected_candidates_insert(g, u, v, emb.m)
        kind = "edge_insert"
    elif op == "delete":
        cand = affected_candidates_delete(g, u, v, emb.m)
        g.remove_edge(u, v)
        kind = "edge_delete"
    else:
        raise ValueError("op must be 'insert' or 'delete', got %r" % (op,))
    pairs = _repair_rows(g, cand, emb)
    return GraphDelta(kind=kind, pairs=pairs, candidate_ids=cand)


def delta_for_node_insert(g: DynamicGraph, new_id: int, edges: Iterable[int],
                          measured_value: float, emb: EmbeddingMatrix,
                          cap: int = DEFAULT_NODE_EDGE_CAP) -> GraphDelta:
    """Append a node with up to ``cap`` incident edges.

    The new node's own row is reported as ``new_row`` (not as a pair);
    pairs cover the other rows changed by the added edges.  Existing row
    indices are unaffected because the node is appended at the end.
    """
    edges = [int(w) for w in edges]
    if len(edges) > cap:
        raise ValueError(
            "node insert with %d edges exceeds the cap of %d" % (len(edges), cap)
        )
    if len(set(edges)) != len(edges):
        raise ValueError("duplicate neighbor in node insert")
    for w in edges:
        if w == new_id:
            raise ValueError("self-loop at node %r rejected" % (new_id,))
        if not g.has_node(w):
            raise ValueError("node %r does not exist" % (w,))
    g.add_node(new_id)
    emb.rows = np.vstack([emb.rows, np.zeros((1, emb.m))])
    cand: set[int] = set()
    for w in edges:
        g.add_edge(new_id, w)
        cand |= affected_candidates_insert(g, new_id, w, emb.m)
    cand.discard(new_id)
    pairs = _repair_rows(g, cand, emb)
    new_row = mnn_embed_node(g, new_id, emb.m)
    emb.rows[-1] = new_row
    cand.add(new_id)
    return GraphDelta(
        kind="node_insert", pairs=pairs, candidate_ids=cand,
        new_row=new_row, measured_value=float(measured_value),
        node_id=int(new_id), node_index=len(g) - 1,
    )


def delta_for_node_delete(g: DynamicGraph, node_id: int, emb: EmbeddingMatrix,
                          measured_value: Optional[float] = None,
                          cap: int = DEFAULT_NODE_EDGE_CAP) -> GraphDelta:
    """Remove a node of degree at most ``cap`` along with its edges.

    Pairs are expressed in post-shift row indexing (rows after the
    removed one move up).  The removed row content and its pre-removal
    index are recorded on the delta.
    """
    if not g.has_node(node_id):
        raise ValueError("node %r does not exist" % (node_id,))
    nbrs = sorted(g.neighbors(node_id))
    if len(nbrs) > cap:
        raise ValueError(
            "node %r has degree %d, above the cap of %d" % (node_id, len(nbrs), cap)
        )
    idx = g.index_of(node_id)
    removed_row = emb.rows[idx].copy()
    cand: set[int] = set()
    for w in nbrs:
        cand |= affected_candidates_delete(g, node_id, w, emb.m)
        g.remove_edge(node_id, w)
    cand.discard(node_id)
    g.remove_node(node_id)
    emb.rows = np.delete(emb.rows, idx, axis=0)
    pairs = _repair_rows(g, cand, emb)
    cand.add(node_id)
    return GraphDelta(
        kind="node_delete", pairs=pairs, candidate_ids=cand,
        removed_row=removed_row,
        measured_value=None if measured_value is None else float(measured_value),
        node_id=int(node_id), node_index=idx,
    )
