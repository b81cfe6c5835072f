"""Sketched least-squares engine over a changing embedding matrix.

The state holds the sketched matrix, its pseudoinverse, the sketched
measured values and the current solution.  Graph mutations arrive as
``GraphDelta`` records and are folded in through rank-one pseudoinverse
updates; a drift guard recomputes the pseudoinverse from scratch at a
configurable cadence.  The ``exact`` backend keeps the raw data instead
of a sketch and redecomposes on every update, which makes it a slow but
trustworthy baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from dynareg.graphstore import GraphDelta
from dynareg.numkit import least_squares_solve, meyer_rank_one_pinv_update, pinv
from dynareg.sketch import (
    CountSketch,
    SrhtSketch,
    countsketch_add_column,
    countsketch_apply,
    countsketch_new,
    countsketch_remove_column,
    countsketch_sample_count,
    srht_apply,
    srht_column,
    srht_new,
    srht_sample_count,
)

__all__ = [
    "BACKENDS",
    "RebuildRequired",
    "RegressionState",
    "ConsistencyReport",
    "preprocess",
    "update_edge",
    "update_node_insert",
    "update_node_delete",
    "apply_delta",
    "exact_solve",
    "residual",
    "verify_consistency",
]

log = logging.getLogger("dynareg.engine")

BACKENDS = ("srht", "countsketch", "exact")

#: Meyer steps between full pseudoinverse recomputations.
DEFAULT_DRIFT_INTERVAL = 1000

#: Relative threshold under which the sketched matrix counts as
#: rank-deficient at preprocessing time.
RANK_WARN_TOL = 1e-10


class RebuildRequired(Exception):
    """The state cannot absorb this delta incrementally and must be
    rebuilt by a fresh preprocess over the current data."""


@dataclass
class ConsistencyReport:
    """Outcome of a from-scratch consistency check."""

    ok: bool
    max_rel: float
    details: dict


class RegressionState:
    """Mutable solver state for one backend.

    Attributes of interest: ``sm`` (sketched matrix), ``sm_pinv`` (its
    maintained pseudoinverse), ``sb`` (sketched values), ``x_approx``
    (current solution, always ``sm_pinv @ sb``), ``sketch`` (None for the
    exact backend) and ``rebuild_count``.
    """

    def __init__(self, backend, eps, seed, m_width, mode, c1, c2,
                 sketch_size_override, drift_interval, sketch,
                 sm, sm_pinv, sb, x_approx,
                 meyer_steps=0, rebuild_count=0, rank_warning=False):
        self.backend = backend
        self.eps = float(eps)
        self.seed = int(seed)
        self.m_width = int(m_width)
        self.mode = mode
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.sketch_size_override = sketch_size_override
        self.drift_interval = int(drift_interval)
        self.sketch = sketch
        self.sm = sm
        self.sm_pinv = sm_pinv
        self.sb = sb
        self.x_approx = x_approx
        self.meyer_steps = int(meyer_steps)
        self.rebuild_count = int(rebuild_count)
        self.rank_warning = bool(rank_warning)

    @property
    def sketch_rows(self) -> int:
        """Height of the sketched system (rows of raw data when exact)."""
        return self.sm.shape[0]


def _check_data(m_mat, b):
    m_mat = np.asarray(m_mat, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if m_mat.ndim != 2:
        raise ValueError("embedding matrix must be 2-d, got ndim=%d" % m_mat.ndim)
    if b.shape != (m_mat.shape[0],):
        raise ValueError(
            "measured values have shape %r, expected (%d,)"
            % (b.shape, m_mat.shape[0])
        )
    return m_mat, b


def preprocess(m_mat: np.ndarray, b: np.ndarray, backend: str, eps: float,
               seed: int, mode: str = "practical", c1: float = 10.0,
               c2: float = 4.0, sketch_size: Optional[int] = None,
               drift_interval: int = DEFAULT_DRIFT_INTERVAL) -> RegressionState:
    """Build a solver state for the given embedding matrix and values.

    ``mode`` is ``"practical"`` or ``"paper-exact"`` and picks the sketch
    sizing rule; ``sketch_size`` overrides the computed size outright.
    A rank warning is logged and flagged on the state when the sketched
    matrix is numerically rank-deficient, since pseudoinverse updates on
    such systems are less trustworthy.
    """
    m_mat, b = _check_data(m_mat, b)
    if backend not in BACKENDS:
        raise ValueError("backend must be one of %r, got %r" % (BACKENDS, backend))
    if mode not in ("practical", "paper-exact"):
        raise ValueError("mode must be 'practical' or 'paper-exact', got %r" % mode)
    n, width = m_mat.shape

    if backend == "srht":
        srht_mode = "paper_exact" if mode == "paper-exact" else "practical"
        size = sketch_size or srht_sample_count(max(n, 1), width, eps, srht_mode, c1)
        sk = srht_new(n, size, seed)
        sm = srht_apply(sk, m_mat)
        sb = srht_apply(sk, b)
    elif backend == "countsketch":
        cs_mode = "paper_form" if mode == "paper-exact" else "practical"
        size = sketch_size or countsketch_sample_count(width, eps, cs_mode, c2)
        sk = countsketch_new(n, size, seed)
        sm = countsketch_apply(sk, m_mat)
        sb = countsketch_apply(sk, b)
    else:
        sk = None
        sm = m_mat.copy()
        sb = b.copy()

    rank_warning = False
    if min(sm.shape) > 0:
        sigmas = np.linalg.svd(sm, compute_uv=False)
        rank_warning = bool(sigmas[-1] <= RANK_WARN_TOL * sigmas[0])
        if rank_warning:
            log.warning("sketched matrix is numerically rank-deficient")
    sm_pinv = pinv(sm)
    x_approx = sm_pinv @ sb
    return RegressionState(
        backend=backend, eps=eps, seed=seed, m_width=width, mode=mode,
        c1=c1, c2=c2, sketch_size_override=sketch_size,
        drift_interval=drift_interval, sketch=sk, sm=sm, sm_pinv=sm_pinv,
        sb=sb, x_approx=x_approx, rank_warning=rank_warning,
    )


def _sketch_column(state: RegressionState, i: int) -> np.ndarray:
    if state.backend == "srht":
        return srht_column(state.sketch, i)
    col = np.zeros(state.sketch.num_rows)
    col[state.sketch.col_rows[i]] = state.sketch.col_signs[i]
    return col


def _fold_pair(state: RegressionState, s_col: np.ndarray, d: np.ndarray) -> None:
    # One rank-one step: patch sm and carry its pseudoinverse along.
    new_sm = state.sm + np.outer(s_col, d)
    state.sm_pinv = meyer_rank_one_pinv_update(state.sm, state.sm_pinv, s_col, d)
    state.sm = new_sm
    state.meyer_steps += 1
    if state.drift_interval > 0 and state.meyer_steps >= state.drift_interval:
        state.sm_pinv = pinv(state.sm)
        state.meyer_steps = 0


def _exact_refresh(state: RegressionState) -> None:
    state.sm_pinv = pinv(state.sm)
    state.x_approx = state.sm_pinv @ state.sb


def update_edge(state: RegressionState, delta: GraphDelta) -> RegressionState:
    """Fold an edge insert or delete into the state.

    Each pair touches one sketch column: the sketched matrix gains
    ``outer(column, d)`` and the pseudoinverse follows through a rank-one
    update.  The solution is refreshed at the end.  The exact backend
    patches its raw rows and redecomposes instead.
    """
    if delta.kind not in ("edge_insert", "edge_delete"):
        raise ValueError("expected an edge delta, got kind=%r" % delta.kind)
    if state.backend == "exact":
        for p in delta.pairs:
            state.sm[p.c_index] += p.d
        _exact_refresh(state)
        return state
    for p in delta.pairs:
        _fold_pair(state, _sketch_column(state, p.c_index), p.d)
    state.x_approx = state.sm_pinv @ state.sb
    return state


def update_node_insert(state: RegressionState, delta: GraphDelta) -> RegressionState:
    """Fold a node insert into the state.

    Only the countsketch backend supports this incrementally: a fresh
    sketch column (row, sign) is drawn for the new node, the sketched
    matrix gains the signed new row, the sketched values gain the signed
    measured value, and the remaining pairs are folded as usual.  The
    srht backend raises ``RebuildRequired``.
    """
    if delta.kind != "node_insert":
        raise ValueError("expected a node_insert delta, got kind=%r" % delta.kind)
    if delta.measured_value is None or delta.new_row is None:
        raise ValueError("node_insert delta is missing new_row or measured_value")
    if state.backend == "srht":
        raise RebuildRequired("srht states rebuild on node changes")
    if state.backend == "exact":
        state.sm = np.vstack([state.sm, delta.new_row[None, :]])
        state.sb = np.append(state.sb, delta.measured_value)
        for p in delta.pairs:
            state.sm[p.c_index] += p.d
        _exact_refresh(state)
        return state
    row, sign = countsketch_add_column(state.sketch, at=state.sketch.n)
    col = np.zeros(state.sketch.num_rows)
    col[row] = sign
    _fold_pair(state, col, delta.new_row)
    state.sb[row] += sign * delta.measured_value
    for p in delta.pairs:
        _fold_pair(state, _sketch_column(state, p.c_index), p.d)
    state.x_approx = state.sm_pinv @ state.sb
    return state


def update_node_delete(state: RegressionState, delta: GraphDelta) -> RegressionState:
    """Fold a node delete into the state, mirroring the insert path.

    The node's sketch column is removed (later columns shift down), the
    signed removed row and measured value are subtracted, and the pairs,
    already in post-shift indexing, are folded as usual.
    """
    if delta.kind != "node_delete":
        raise ValueError("expected a node_delete delta, got kind=%r" % delta.kind)
    if delta.measured_value is None or delta.removed_row is None \
            or delta.node_index is None:
        raise ValueError("node_delete delta is missing fields")
    if state.backend == "srht":
        raise RebuildRequired("srht states rebuild on node changes")
    if state.backend == "exact":
        state.sm = np.delete(state.sm, delta.node_index, axis=0)
        state.sb = np.delete(state.sb, delta.node_index)
        for p in delta.pairs:
            state.sm[p.c_index] += p.d
        _exact_refresh(state)
        return state
    row, sign = countsketch_remove_column(state.sketch, at=delta.node_index)
    col = np.zeros(state.sketch.num_rows)
    col[row] = -sign
    _fold_pair(state, col, delta.removed_row)
    state.sb[row] -= sign * delta.measured_value
    for p in delta.pairs:
        _fold_pair(state, _sketch_column(state, p.c_index), p.d)
    state.x_approx = state.sm_pinv @ state.sb
    return state


def apply_delta(state: RegressionState, delta: GraphDelta,
                m_mat: np.ndarray, b: np.ndarray) -> RegressionState:
    """Dispatch a delta to the right update routine.

    ``m_mat`` and ``b`` must already reflect the mutation; they are only
    read when the state has to be rebuilt from scratch, in which case a
    fresh state is returned with ``rebuild_count`` bumped.
    """
    try:
        if delta.kind in ("edge_insert", "edge_delete"):
            return update_edge(state, delta)
        if delta.kind == "node_insert":
            return update_node_insert(state, delta)
        if delta.kind == "node_delete":
            return update_node_delete(state, delta)
        raise ValueError("unknown delta kind %r" % delta.kind)
    except RebuildRequired:
        fresh = preprocess(
            m_mat, b, state.backend, state.eps, state.seed, mode=state.mode,
            c1=state.c1, c2=state.c2, sketch_size=state.sketch_size_override,
            drift_interval=state.drift_interval,
        )
        fresh.rebuild_count = state.rebuild_count + 1
        return fresh


def exact_solve(m_mat: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution over the raw data."""
    m_mat, b = _check_data(m_mat, b)
    return least_squares_solve(m_mat, b)


def residual(m_mat: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    """Euclidean residual norm ``||m_mat @ x - b||`` (the norm, not its square)."""
    m_mat, b = _check_data(m_mat, b)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m_mat.shape[1],):
        raise ValueError(
            "solution has shape %r, expected (%d,)" % (x.shape, m_mat.shape[1])
        )
    return float(np.linalg.norm(m_mat @ x - b))


def _rel(delta_norm: float, ref_norm: float) -> float:
    return delta_norm / (1.0 + ref_norm)


def verify_consistency(state: RegressionState, m_mat: np.ndarray,
                       b: np.ndarray, tol: float = 1e-8) -> ConsistencyReport:
    """Recompute the sketched quantities from current data and compare.

    The stored sketch is re-applied to ``m_mat`` and ``b``, so this
    isolates drift in the incrementally maintained products from sketch
    randomness.  Passes when every relative deviation is at most ``tol``.
    """
    m_mat, b = _check_data(m_mat, b)
    if state.backend == "srht":
        if m_mat.shape[0] != state.sketch.n:
            raise ValueError(
                "state sketch covers %d rows but data has %d; missed rebuild?"
                % (state.sketch.n, m_mat.shape[0])
            )
        sm0 = srht_apply(state.sketch, m_mat)
        sb0 = srht_apply(state.sketch, b)
    elif state.backend == "countsketch":
        if m_mat.shape[0] != state.sketch.n:
            raise ValueError(
                "state sketch covers %d rows but data has %d" %
                (state.sketch.n, m_mat.shape[0])
            )
        sm0 = countsketch_apply(state.sketch, m_mat)
        sb0 = countsketch_apply(state.sketch, b)
    else:
        sm0 = m_mat
        sb0 = b
    pinv0 = pinv(sm0)
    x0 = pinv0 @ sb0
    details = {
        "sm": _rel(float(np.linalg.norm(state.sm - sm0)),
                   float(np.linalg.norm(sm0))),
        "sb": _rel(float(np.linalg.norm(state.sb - sb0)),
                   float(np.linalg.norm(sb0))),
        "sm_pinv": _rel(float(np.linalg.norm(state.sm_pinv - pinv0)),
                        float(np.linalg.norm(pinv0))),
        "x_approx": _rel(float(np.linalg.norm(state.x_approx - x0)),
                         float(np.linalg.norm(x0))),
    }
    max_rel = max(details.values())
    return ConsistencyReport(ok=max_rel <= tol, max_rel=max_rel, details=details)
