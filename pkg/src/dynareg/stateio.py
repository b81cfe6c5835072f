"""Binary serialization of a solver state plus its graph and data.

The format is a fixed little-endian layout with a magic prefix and a
version number.  Saving the same state twice produces byte-identical
files, and a load/save round trip preserves every float bit and the
random stream position of a count sketch, so a replay can continue
exactly where a previous process stopped.
"""

from __future__ import annotations

import math
import struct
from typing import BinaryIO

import numpy as np

from dynareg.engine import RegressionState
from dynareg.graphstore import DynamicGraph, EmbeddingMatrix
from dynareg.sketch import CountSketch, SrhtSketch, countsketch_restore

__all__ = ["save_state", "load_state", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"DYNREGST"
FORMAT_VERSION = 1

_BACKEND_CODES = {"exact": 0, "srht": 1, "countsketch": 2}
_BACKEND_NAMES = {v: k for k, v in _BACKEND_CODES.items()}
_MODE_CODES = {"practical": 0, "paper-exact": 1}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


def _w_i64(f: BinaryIO, x: int) -> None:
    f.write(struct.pack("<q", int(x)))


def _w_f64(f: BinaryIO, x: float) -> None:
    f.write(struct.pack("<d", float(x)))


def _w_f64_array(f: BinaryIO, a: np.ndarray) -> None:
    f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _w_i64_array(f: BinaryIO, a: np.ndarray) -> None:
    f.write(np.ascontiguousarray(a, dtype="<i8").tobytes())


def _w_i8_array(f: BinaryIO, a: np.ndarray) -> None:
    f.write(np.ascontiguousarray(a, dtype="i1").tobytes())


def _r_exact(f: BinaryIO, count: int) -> bytes:
    buf = f.read(count)
    if len(buf) != count:
        raise ValueError("state file truncated")
    return buf


def _r_i64(f: BinaryIO) -> int:
    return struct.unpack("<q", _r_exact(f, 8))[0]


def _r_f64(f: BinaryIO) -> float:
    return struct.unpack("<d", _r_exact(f, 8))[0]


def _r_f64_array(f: BinaryIO, count: int) -> np.ndarray:
    return np.frombuffer(_r_exact(f, 8 * count), dtype="<f8").astype(
        np.float64, copy=True)


def _r_i64_array(f: BinaryIO, count: int) -> np.ndarray:
    return np.frombuffer(_r_exact(f, 8 * count), dtype="<i8").astype(
        np.int64, copy=True)


def _r_i8_array(f: BinaryIO, count: int) -> np.ndarray:
    return np.frombuffer(_r_exact(f, count), dtype="i1").astype(
        np.int8, copy=True)


def save_state(path: str, state: RegressionState, graph: DynamicGraph,
               emb: EmbeddingMatrix, b: np.ndarray) -> None:
    """Write state, graph, embedding and measured values to ``path``."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack(
            "<BBBB",
            _BACKEND_CODES[state.backend],
            _MODE_CODES[state.mode],
            1 if state.rank_warning else 0,
            0,
        ))
        _w_f64(f, state.eps)
        _w_i64(f, state.seed)
        _w_i64(f, state.m_width)
        _w_f64(f, state.c1)
        _w_f64(f, state.c2)
        _w_i64(f, -1 if state.sketch_size_override is None
               else state.sketch_size_override)
        _w_i64(f, state.drift_interval)
        _w_i64(f, state.meyer_steps)
        _w_i64(f, state.rebuild_count)

        ids = graph.node_ids
        _w_i64(f, len(ids))
        _w_i64_array(f, np.asarray(ids, dtype=np.int64))
        edges = graph.edges()
        _w_i64(f, len(edges))
        _w_i64_array(f, np.asarray(edges, dtype=np.int64).reshape(-1))

        _w_f64_array(f, np.asarray(b, dtype=np.float64))
        _w_i64(f, emb.m)
        _w_f64_array(f, emb.rows)

        if state.backend == "srht":
            sk = state.sketch
            _w_i64(f, sk.n)
            _w_i64(f, sk.n_padded)
            _w_i64(f, sk.num_samples)
            _w_i8_array(f, sk.signs.astype(np.int8))
            _w_i64_array(f, sk.samples)
        elif state.backend == "countsketch":
            sk = state.sketch
            _w_i64(f, sk.num_rows)
            _w_i64(f, sk.n)
            _w_i64(f, sk.init_cols)
            _w_i64(f, sk.extra_draws)
            _w_i64_array(f, sk.col_rows)
            _w_i8_array(f, sk.col_signs.astype(np.int8))

        _w_i64(f, state.sm.shape[0])
        _w_i64(f, state.sm.shape[1])
        _w_f64_array(f, state.sm)
        _w_f64_array(f, state.sm_pinv)
        _w_f64_array(f, state.sb)
        _w_f64_array(f, state.x_approx)


def load_state(path: str):
    """Read a saved file; returns ``(state, graph, emb, b)``."""
    with open(path, "rb") as f:
        if _r_exact(f, 8) != MAGIC:
            raise ValueError("not a state file: bad magic")
        version = struct.unpack("<I", _r_exact(f, 4))[0]
        if version != FORMAT_VERSION:
            raise ValueError("unsupported state format version %d" % version)
        backend_code, mode_code, rank_flag, _pad = struct.unpack(
            "<BBBB", _r_exact(f, 4))
        if backend_code not in _BACKEND_NAMES:
            raise ValueError("unknown backend code %d" % backend_code)
        if mode_code not in _MODE_NAMES:
            raise ValueError("unknown mode code %d" % mode_code)
        backend = _BACKEND_NAMES[backend_code]
        mode = _MODE_NAMES[mode_code]
        eps = _r_f64(f)
        seed = _r_i64(f)
        m_width = _r_i64(f)
        c1 = _r_f64(f)
        c2 = _r_f64(f)
        override = _r_i64(f)
        sketch_size_override = None if override < 0 else override
        drift_interval = _r_i64(f)
        meyer_steps = _r_i64(f)
        rebuild_count = _r_i64(f)

        n_nodes = _r_i64(f)
        ids = _r_i64_array(f, n_nodes)
        n_edges = _r_i64(f)
        edge_flat = _r_i64_array(f, 2 * n_edges)
        graph = DynamicGraph()
        for v in ids:
            graph.add_node(int(v))
        for k in range(n_edges):
            graph.add_edge(int(edge_flat[2 * k]), int(edge_flat[2 * k + 1]))

        b = _r_f64_array(f, n_nodes)
        emb_m = _r_i64(f)
        emb = EmbeddingMatrix(
            emb_m, _r_f64_array(f, n_nodes * emb_m).reshape(n_nodes, emb_m))

        if backend == "srht":
            sk_n = _r_i64(f)
            n_padded = _r_i64(f)
            num_samples = _r_i64(f)
            signs = _r_i8_array(f, n_padded).astype(np.float64)
            samples = _r_i64_array(f, num_samples)
            scale = math.sqrt(n_padded / num_samples)
            sketch = SrhtSketch(sk_n, n_padded, num_samples, signs, samples,
                                scale, seed)
        elif backend == "countsketch":
            num_rows = _r_i64(f)
            sk_n = _r_i64(f)
            init_cols = _r_i64(f)
            extra_draws = _r_i64(f)
            col_rows = _r_i64_array(f, sk_n)
            col_signs = _r_i8_array(f, sk_n).astype(np.float64)
            sketch = countsketch_restore(num_rows, sk_n, col_rows, col_signs,
                                         seed, init_cols, extra_draws)
        else:
            sketch = None

        rows = _r_i64(f)
        cols = _r_i64(f)
        sm = _r_f64_array(f, rows * cols).reshape(rows, cols)
        sm_pinv = _r_f64_array(f, rows * cols).reshape(cols, rows)
        sb = _r_f64_array(f, rows)
        x_approx = _r_f64_array(f, cols)
        trailing = f.read(1)
        if trailing:
            raise ValueError("state file has trailing bytes")

    state = RegressionState(
        backend=backend, eps=eps, seed=seed, m_width=m_width, mode=mode,
        c1=c1, c2=c2, sketch_size_override=sketch_size_override,
        drift_interval=drift_interval, sketch=sketch, sm=sm, sm_pinv=sm_pinv,
        sb=sb, x_approx=x_approx, meyer_steps=meyer_steps,
        rebuild_count=rebuild_count, rank_warning=bool(rank_flag),
    )
    return state, graph, emb, b
