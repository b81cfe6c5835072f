"""Graph, embedding and delta tests.

The oracle for every delta test is a full rebuild: after each mutation
the incrementally patched matrix must equal ``build_embedding`` on the
new graph exactly, and the brute-force set of changed rows must be
covered by the delta's candidate set.
"""

import collections

import numpy as np
import pytest

from dynareg.graphstore import (
    DynamicGraph,
    affected_candidates_delete,
    affected_candidates_insert,
    build_embedding,
    delta_for_edge,
    delta_for_node_delete,
    delta_for_node_insert,
    mnn_embed_node,
)


def graph_from_edges(n, edges):
    g = DynamicGraph()
    for v in range(1, n + 1):
        g.add_node(v)
    for u, v in edges:
        g.add_edge(u, v)
    return g


def bfs_distances(g, source):
    dist = {source: 0}
    queue = collections.deque([source])
    while queue:
        x = queue.popleft()
        for y in g.neighbors(x):
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def mnn_oracle(g, v, m):
    """Nearest rows by exhaustive distance computation and sorting."""
    dist = bfs_distances(g, v)
    ranked = sorted((d, w) for w, d in dist.items() if w != v)
    ids = [w for _, w in ranked[:m]]
    ids.extend([0] * (m - len(ids)))
    return np.asarray(ids, dtype=np.float64)


class TestGraph:
    def test_row_order_follows_insertion(self):
        g = graph_from_edges(4, [(1, 2)])
        assert g.node_ids == [1, 2, 3, 4]
        assert g.index_of(3) == 2 and g.node_at(0) == 1

    def test_edges_canonical(self):
        g = graph_from_edges(4, [(3, 1), (4, 2), (1, 2)])
        assert g.edges() == [(1, 2), (1, 3), (2, 4)]

    def test_remove_node_shifts_rows(self):
        g = graph_from_edges(5, [(1, 2), (2, 3), (4, 5)])
        g.remove_node(2)
        assert g.node_ids == [1, 3, 4, 5]
        assert g.index_of(3) == 1
        assert not g.has_edge(1, 2) and not g.has_edge(2, 3)

    def test_validation(self):
        g = DynamicGraph()
        with pytest.raises(ValueError):
            g.add_node(0)
        with pytest.raises(ValueError):
            g.add_node(-3)
        with pytest.raises(ValueError):
            g.add_node(True)
        g.add_node(1)
        with pytest.raises(ValueError):
            g.add_node(1)
        g.add_node(2)
        with pytest.raises(ValueError):
            g.add_edge(1, 1)
        with pytest.raises(ValueError):
            g.add_edge(1, 9)
        g.add_edge(1, 2)
        with pytest.raises(ValueError):
            g.add_edge(2, 1)
        with pytest.raises(ValueError):
            g.remove_edge(1, 9)
        with pytest.raises(ValueError):
            g.remove_node(9)


class TestEmbedRow:
    def test_path(self):
        g = graph_from_edges(3, [(1, 2), (2, 3)])
        assert np.array_equal(mnn_embed_node(g, 1, 2), [2.0, 3.0])
        assert np.array_equal(mnn_embed_node(g, 2, 2), [1.0, 3.0])
        assert np.array_equal(mnn_embed_node(g, 3, 2), [2.0, 1.0])

    def test_triangle(self):
        g = graph_from_edges(3, [(1, 2), (2, 3), (1, 3)])
        for v, expect in [(1, [2, 3]), (2, [1, 3]), (3, [1, 2])]:
            assert np.array_equal(mnn_embed_node(g, v, 2), np.float64(expect))

    def test_star_tie_break_by_id(self):
        g = graph_from_edges(5, [(1, 2), (1, 3), (1, 4), (1, 5)])
        assert np.array_equal(mnn_embed_node(g, 1, 3), [2.0, 3.0, 4.0])
        assert np.array_equal(mnn_embed_node(g, 2, 3), [1.0, 3.0, 4.0])

    def test_isolated_node_padded_with_sentinel(self):
        g = graph_from_edges(4, [(1, 2)])
        assert np.array_equal(mnn_embed_node(g, 3, 3), [0.0, 0.0, 0.0])
        assert np.array_equal(mnn_embed_node(g, 1, 3), [2.0, 0.0, 0.0])

    def test_validation(self):
        g = graph_from_edges(2, [])
        with pytest.raises(ValueError):
            mnn_embed_node(g, 1, 0)
        with pytest.raises(ValueError):
            mnn_embed_node(g, 7, 2)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 60))
        edges = random_edge_set(rng, n, 0.12)
        g = graph_from_edges(n, edges)
        for m in (1, 2, 3, 5):
            for v in g.node_ids:
                assert np.array_equal(mnn_embed_node(g, v, m),
                                      mnn_oracle(g, v, m)), (n, m, v)

    @pytest.mark.parametrize("seed", range(4))
    def test_entries_within_m_hops(self, seed):
        rng = np.random.default_rng(50 + seed)
        n = int(rng.integers(3, 40))
        g = graph_from_edges(n, random_edge_set(rng, n, 0.15))
        m = int(rng.integers(1, 5))
        for v in g.node_ids:
            dist = bfs_distances(g, v)
            for w in mnn_embed_node(g, v, m):
                if w != 0.0:
                    assert dist[int(w)] <= m


def random_edge_set(rng, n, p):
    edges = []
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if rng.random() < p:
                edges.append((u, v))
    return edges


class TestCandidates:
    def test_insert_requires_edge_present(self):
        g = graph_from_edges(3, [(1, 2)])
        with pytest.raises(ValueError):
            affected_candidates_insert(g, 1, 3, 2)

    def test_delete_requires_edge_present(self):
        g = graph_from_edges(3, [(1, 2)])
        with pytest.raises(ValueError):
            affected_candidates_delete(g, 1, 3, 2)

    def test_endpoints_always_included(self):
        g = graph_from_edges(4, [(1, 2), (3, 4), (1, 3)])
        q = affected_candidates_insert(g, 1, 3, 2)
        assert {1, 3} <= q


def changed_ids(g_before, emb_before, g_after, emb_after):
    """Node ids present in both snapshots whose rows differ."""
    out = set()
    for v in g_after.node_ids:
        if g_before.has_node(v):
            row_b = emb_before.rows[g_before.index_of(v)]
            row_a = emb_after.rows[g_after.index_of(v)]
            if not np.array_equal(row_b, row_a):
                out.add(v)
    return out


def assert_pairs_reconstruct(emb_before_rows, pairs, emb_after_rows):
    acc = emb_before_rows.copy()
    for p in pairs:
        acc[p.c_index] += p.d
    assert np.array_equal(acc, emb_after_rows)


class TestEdgeDelta:
    def test_insert_path_shortcut(self):
        # Closing the 4-path into a cycle changes the far endpoints' rows.
        g = graph_from_edges(4, [(1, 2), (2, 3), (3, 4)])
        emb = build_embedding(g, 2)
        before_g, before_emb = g.copy(), emb.copy()
        delta = delta_for_edge(g, "insert", 1, 4, emb)
        assert delta.kind == "edge_insert"
        rebuilt = build_embedding(g, 2)
        assert np.array_equal(emb.rows, rebuilt.rows)
        changed = changed_ids(before_g, before_emb, g, emb)
        assert changed <= delta.candidate_ids
        assert np.array_equal(emb.rows[0], [2.0, 4.0])
        assert_pairs_reconstruct(before_emb.rows, delta.pairs, emb.rows)

    def test_delete_reverses_insert(self):
        g = graph_from_edges(4, [(1, 2), (2, 3), (3, 4)])
        emb = build_embedding(g, 2)
        baseline = emb.rows.copy()
        delta_for_edge(g, "insert", 1, 4, emb)
        delta = delta_for_edge(g, "delete", 1, 4, emb)
        assert delta.kind == "edge_delete"
        assert np.array_equal(emb.rows, baseline)
        assert not g.has_edge(1, 4)

    def test_unknown_op_rejected(self):
        g = graph_from_edges(2, [])
        emb = build_embedding(g, 1)
        with pytest.raises(ValueError):
            delta_for_edge(g, "toggle", 1, 2, emb)

    def test_duplicate_insert_rejected(self):
        g = graph_from_edges(2, [(1, 2)])
        emb = build_embedding(g, 1)
        with pytest.raises(ValueError):
            delta_for_edge(g, "insert", 1, 2, emb)


class TestNodeDelta:
    def test_insert_appends_row(self):
        g = graph_from_edges(3, [(1, 2), (2, 3)])
        emb = build_embedding(g, 2)
        delta = delta_for_node_insert(g, 9, [1, 3], 0.5, emb)
        assert delta.kind == "node_insert"
        assert delta.node_id == 9 and delta.node_index == 3
        assert delta.measured_value == 0.5
        assert g.node_ids == [1, 2, 3, 9]
        rebuilt = build_embedding(g, 2)
        assert np.array_equal(emb.rows, rebuilt.rows)
        assert np.array_equal(delta.new_row, mnn_embed_node(g, 9, 2))

    def test_insert_validates_before_mutating(self):
        g = graph_from_edges(3, [(1, 2)])
        emb = build_embedding(g, 2)
        with pytest.raises(ValueError):
            delta_for_node_insert(g, 9, [1, 7], 0.0, emb)
        assert not g.has_node(9)
        assert emb.rows.shape == (3, 2)

    def test_insert_respects_edge_cap(self):
        g = graph_from_edges(5, [])
        emb = build_embedding(g, 2)
        with pytest.raises(ValueError):
            delta_for_node_insert(g, 9, [1, 2, 3], 0.0, emb, cap=2)

    def test_delete_removes_row(self):
        g = graph_from_edges(4, [(1, 2), (2, 3), (3, 4)])
        emb = build_embedding(g, 2)
        removed_expected = emb.rows[1].copy()
        delta = delta_for_node_delete(g, 2, emb, measured_value=7.0)
        assert delta.kind == "node_delete"
        assert delta.node_id == 2 and delta.node_index == 1
        assert delta.measured_value == 7.0
        assert np.array_equal(delta.removed_row, removed_expected)
        assert g.node_ids == [1, 3, 4]
        rebuilt = build_embedding(g, 2)
        assert np.array_equal(emb.rows, rebuilt.rows)

    def test_delete_respects_degree_cap(self):
        g = graph_from_edges(5, [(1, 2), (1, 3), (1, 4)])
        emb = build_embedding(g, 2)
        with pytest.raises(ValueError):
            delta_for_node_delete(g, 1, emb, cap=2)


class TestDeltaHammer:
    """Random mixed mutations replayed against full rebuilds."""

    @pytest.mark.parametrize("seed", range(8))
    def test_patched_equals_rebuild(self, seed):
        rng = np.random.default_rng(3000 + seed)
        n = int(rng.integers(4, 60))
        m = int(rng.integers(1, 4))
        g = graph_from_edges(n, random_edge_set(rng, n, 0.1))
        emb = build_embedding(g, m)
        next_id = n + 1
        for _ in range(40):
            before_g, before_emb = g.copy(), emb.copy()
            op = rng.choice(["+e", "-e", "+n", "-n"])
            delta = apply_random_op(rng, g, emb, op, next_id)
            if delta is None:
                continue
            if delta.kind == "node_insert":
                next_id += 1
            rebuilt = build_embedding(g, m)
            assert np.array_equal(emb.rows, rebuilt.rows), (seed, op)
            changed = changed_ids(before_g, before_emb, g, emb)
            assert changed <= delta.candidate_ids, (seed, op)
            if delta.kind in ("edge_insert", "edge_delete"):
                assert_pairs_reconstruct(before_emb.rows, delta.pairs,
                                         emb.rows)


def apply_random_op(rng, g, emb, op, next_id):
    """Mutate with one applicable random operation; None when impossible."""
    ids = g.node_ids
    if op == "+e":
        absent = [(u, v) for i, u in enumerate(ids) for v in ids[i + 1:]
                  if not g.has_edge(u, v)]
        if not absent:
            return None
        u, v = absent[rng.integers(0, len(absent))]
        return delta_for_edge(g, "insert", u, v, emb)
    if op == "-e":
        edges = g.edges()
        if not edges:
            return None
        u, v = edges[rng.integers(0, len(edges))]
        return delta_for_edge(g, "delete", u, v, emb)
    if op == "+n":
        k = int(rng.integers(0, min(4, len(ids)) + 1))
        nbrs = list(rng.choice(ids, size=k, replace=False)) if k else []
        return delta_for_node_insert(g, next_id, nbrs, 0.0, emb)
    candidates = [v for v in ids if g.degree(v) <= 16]
    if len(candidates) == 0 or len(ids) <= 2:
        return None
    v = candidates[rng.integers(0, len(candidates))]
    return delta_for_node_delete(g, v, emb, measured_value=0.0)
