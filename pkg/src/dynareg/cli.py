"""Command-line harness: preprocess graphs, replay update streams,
benchmark backends against each other and verify saved states.

File formats are plain text.  A graph file starts with a header line
``n m`` (node count and embedding width) followed by one ``u v`` edge
per line over 1-based node ids.  A values file carries one real per
line in node order.  An update stream carries one record per line:
``+e u v``, ``-e u v``, ``+n id value [neighbor ...]`` or ``-n id``.

Exit codes: 0 success, 1 validation or parse error, 2 consistency
failure.  ``DYNAREG_LOG`` selects the log level (error, info, debug).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
import time
from typing import Optional

import numpy as np

from dynareg import engine, stateio
from dynareg.graphstore import (
    DynamicGraph,
    EmbeddingMatrix,
    build_embedding,
    delta_for_edge,
    delta_for_node_delete,
    delta_for_node_insert,
)

__all__ = ["main"]

log = logging.getLogger("dynareg.cli")

#: Residuals below this (relative to ``1 + ||b||``) count as exactly
#: solvable, making the residual ratio 1 by convention.
RATIO_FLOOR = 1e-12


class _UsageError(Exception):
    """Bad flags or unparseable input; mapped to exit code 1."""


class _ConsistencyError(Exception):
    """A verification step failed; mapped to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _configure_logging() -> None:
    level_name = os.environ.get("DYNAREG_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level_name not in levels:
        raise _UsageError(
            "DYNAREG_LOG must be error, info or debug, got %r" % level_name)
    logging.basicConfig(
        level=levels[level_name],
        format="%(levelname)s %(name)s: %(message)s",
    )


def _parse_graph(path: str) -> tuple[DynamicGraph, int]:
    """Read a graph file; returns the graph and the embedding width."""
    g = DynamicGraph()
    m = None
    n = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise _UsageError("cannot read graph file: %s" % exc)
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if n is None:
                if len(parts) != 2:
                    raise _UsageError(
                        "%s:%d: header must be 'n m'" % (path, lineno))
                try:
                    n, m = int(parts[0]), int(parts[1])
                except ValueError:
                    raise _UsageError(
                        "%s:%d: header must be two integers" % (path, lineno))
                if n < 0 or m < 1:
                    raise _UsageError(
                        "%s:%d: need n >= 0 and m >= 1" % (path, lineno))
                for v in range(1, n + 1):
                    g.add_node(v)
                continue
            if len(parts) != 2:
                raise _UsageError(
                    "%s:%d: edge line must be 'u v'" % (path, lineno))
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise _UsageError(
                    "%s:%d: edge endpoints must be integers" % (path, lineno))
            try:
                g.add_edge(u, v)
            except ValueError as exc:
                raise _UsageError("%s:%d: %s" % (path, lineno, exc))
    if n is None:
        raise _UsageError("%s: missing header line" % path)
    return g, m


def _parse_values(path: str, n: int) -> np.ndarray:
    vals = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise _UsageError("cannot read values file: %s" % exc)
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise _UsageError(
                    "%s:%d: not a real number: %r" % (path, lineno, line))
    if len(vals) != n:
        raise _UsageError(
            "%s: %d values for %d nodes" % (path, len(vals), n))
    return np.asarray(vals, dtype=np.float64)


def _parse_updates(path: str) -> list[tuple]:
    """Read an update stream into ``(op, ...)`` tuples."""
    records = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise _UsageError("cannot read updates file: %s" % exc)
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            op = parts[0]
            try:
                if op in ("+e", "-e"):
                    if len(parts) != 3:
                        raise ValueError("expected '%s u v'" % op)
                    records.append((op, int(parts[1]), int(parts[2])))
                elif op == "+n":
                    if len(parts) < 3:
                        raise ValueError("expected '+n id value [nbr ...]'")
                    records.append((op, int(parts[1]), float(parts[2]),
                                    [int(p) for p in parts[3:]]))
                elif op == "-n":
                    if len(parts) != 2:
                        raise ValueError("expected '-n id'")
                    records.append((op, int(parts[1])))
                else:
                    raise ValueError("unknown record type %r" % op)
            except ValueError as exc:
                raise _UsageError("%s:%d: %s" % (path, lineno, exc))
    return records


def _check_eps(eps: float) -> float:
    if not 0.0 < eps < 1.0:
        raise _UsageError("--eps must lie in (0, 1), got %g" % eps)
    return eps


def _apply_record(state, g: DynamicGraph, emb: EmbeddingMatrix,
                  b: np.ndarray, rec: tuple):
    """Apply one update record; returns ``(state, b, solver_ns)``.

    The graph and embedding are mutated in place; ``b`` is replaced on
    node records.  Only the solver update is timed; building the
    embedding delta is shared bookkeeping common to every backend.
    Raises ``ValueError`` when the record does not apply to the current
    graph.
    """
    op = rec[0]
    if op == "+e":
        delta = delta_for_edge(g, "insert", rec[1], rec[2], emb)
    elif op == "-e":
        delta = delta_for_edge(g, "delete", rec[1], rec[2], emb)
    elif op == "+n":
        delta = delta_for_node_insert(g, rec[1], rec[3], rec[2], emb)
        b = np.append(b, rec[2])
    elif op == "-n":
        if not g.has_node(rec[1]):
            raise ValueError("node %d does not exist" % rec[1])
        idx = g.index_of(rec[1])
        measured = float(b[idx])
        delta = delta_for_node_delete(g, rec[1], emb,
                                      measured_value=measured)
        b = np.delete(b, idx)
    else:
        raise ValueError("unknown record type %r" % op)
    t0 = time.perf_counter_ns()
    state = engine.apply_delta(state, delta, emb.rows, b)
    solver_ns = time.perf_counter_ns() - t0
    return state, b, solver_ns


def _residual_ratio(emb: EmbeddingMatrix, b: np.ndarray, x: np.ndarray) -> float:
    res = engine.residual(emb.rows, b, x)
    res_opt = engine.residual(emb.rows, b, engine.exact_solve(emb.rows, b))
    if res_opt <= RATIO_FLOOR * (1.0 + float(np.linalg.norm(b))):
        return 1.0
    return res / res_opt


def _fmt(x: float) -> str:
    return "%.17g" % x


class _ReportWriter:
    """Writes paired line-delimited records and a flat table.

    ``prefix`` yields ``prefix.jsonl`` and ``prefix.csv``.  ``None``
    disables output.
    """

    def __init__(self, prefix: Optional[str], columns: list[str]):
        self._jsonl = None
        self._csv = None
        self._columns = columns
        if prefix is not None:
            self._jsonl = open(prefix + ".jsonl", "w", encoding="utf-8")
            self._csv_file = open(prefix + ".csv", "w", encoding="utf-8",
                                  newline="")
            self._csv = csv.writer(self._csv_file)
            self._csv.writerow(columns)

    def config(self, record: dict) -> None:
        if self._jsonl is not None:
            self._jsonl.write(json.dumps({"type": "config", **record},
                                         sort_keys=True) + "\n")

    def row(self, record: dict) -> None:
        if self._jsonl is None:
            return
        self._jsonl.write(json.dumps({"type": "record", **record},
                                     sort_keys=True) + "\n")
        cells = []
        for col in self._columns:
            val = record.get(col, "")
            cells.append(_fmt(val) if isinstance(val, float) else str(val))
        self._csv.writerow(cells)

    def summary(self, record: dict) -> None:
        if self._jsonl is not None:
            self._jsonl.write(json.dumps({"type": "summary", **record},
                                         sort_keys=True) + "\n")

    def close(self) -> None:
        if self._jsonl is not None:
            self._jsonl.close()
            self._csv_file.close()


def _run_stream(state, g, emb, b, records, verify_every, writer,
                backend_label, seed_label):
    """Replay ``records`` over a live state, timing each solver update.

    Residual bookkeeping runs outside the clock.  Returns the final
    ``(state, b, wall_ns_list, ratio_list)``.
    """
    wall_ns = []
    ratios = []
    for i, rec in enumerate(records):
        try:
            state, b, dt = _apply_record(state, g, emb, b, rec)
        except ValueError as exc:
            raise _UsageError("update record %d (%s): %s" % (i, rec[0], exc))
        wall_ns.append(dt)
        ratio = _residual_ratio(emb, b, state.x_approx)
        ratios.append(ratio)
        if writer is not None:
            writer.row({
                "backend": backend_label, "seed": seed_label, "index": i,
                "op": rec[0], "wall_ns": dt, "ratio": ratio,
                "sketch_rows": state.sketch_rows,
                "rebuilds": state.rebuild_count,
            })
        if verify_every and (i + 1) % verify_every == 0:
            report = engine.verify_consistency(state, emb.rows, b)
            if not report.ok:
                raise _ConsistencyError(
                    "consistency check failed after record %d: "
                    "max relative deviation %.3e (%s)"
                    % (i, report.max_rel, report.details))
            log.info("record %d: consistency ok (max rel %.3e)",
                     i, report.max_rel)
    return state, b, wall_ns, ratios


_REPORT_COLUMNS = ["backend", "seed", "index", "op", "wall_ns", "ratio",
                   "sketch_rows", "rebuilds"]


def cmd_preprocess(args) -> int:
    g, m_header = _parse_graph(args.graph)
    m = args.m if args.m is not None else m_header
    if m < 1:
        raise _UsageError("--m must be positive, got %d" % m)
    b = _parse_values(args.values, len(g))
    _check_eps(args.eps)
    emb = build_embedding(g, m)
    t0 = time.perf_counter()
    state = engine.preprocess(
        emb.rows, b, args.backend, args.eps, args.seed, mode=args.mode,
        c1=args.c1, c2=args.c2, sketch_size=args.sketch_size)
    elapsed = time.perf_counter() - t0
    print("nodes: %d" % len(g))
    print("width: %d" % m)
    print("backend: %s" % args.backend)
    print("sketch rows: %d" % state.sketch_rows)
    print("preprocess seconds: %.6f" % elapsed)
    if state.rank_warning:
        print("warning: sketched matrix is numerically rank-deficient")
    print("x: %s" % " ".join(_fmt(v) for v in state.x_approx))
    if args.out:
        stateio.save_state(args.out, state, g, emb, b)
        print("state written: %s" % args.out)
    return 0


def cmd_replay(args) -> int:
    state, g, emb, b = stateio.load_state(args.state)
    records = _parse_updates(args.updates)
    writer = _ReportWriter(args.report, _REPORT_COLUMNS)
    try:
        writer.config({
            "command": "replay", "backend": state.backend,
            "seed": state.seed, "eps": state.eps, "m": state.m_width,
            "mode": state.mode, "records": len(records),
            "verify_every": args.verify_every,
        })
        state, b, wall_ns, ratios = _run_stream(
            state, g, emb, b, records, args.verify_every, writer,
            state.backend, state.seed)
        writer.summary({
            "records": len(records),
            "median_wall_ns": float(statistics.median(wall_ns)) if wall_ns else 0.0,
            "rebuilds": state.rebuild_count,
        })
    finally:
        writer.close()
    print("applied %d updates (%d rebuilds)"
          % (len(records), state.rebuild_count))
    print("x: %s" % " ".join(_fmt(v) for v in state.x_approx))
    if args.out:
        stateio.save_state(args.out, state, g, emb, b)
        print("state written: %s" % args.out)
    return 0


def cmd_verify(args) -> int:
    state, g, emb, b = stateio.load_state(args.state)
    report = engine.verify_consistency(state, emb.rows, b)
    for name in sorted(report.details):
        print("%s: relative deviation %.3e" % (name, report.details[name]))
    if not report.ok:
        raise _ConsistencyError(
            "max relative deviation %.3e exceeds tolerance" % report.max_rel)
    print("consistency: pass (max relative deviation %.3e)" % report.max_rel)
    return 0


def cmd_bench(args) -> int:
    g0, m_header = _parse_graph(args.graph)
    m = args.m if args.m is not None else m_header
    if m < 1:
        raise _UsageError("--m must be positive, got %d" % m)
    b0 = _parse_values(args.values, len(g0))
    _check_eps(args.eps)
    records = _parse_updates(args.updates)
    backends = [s.strip() for s in args.backends.split(",") if s.strip()]
    for be in backends:
        if be not in engine.BACKENDS:
            raise _UsageError("unknown backend %r" % be)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise _UsageError("--seeds must be a comma-separated integer list")
    if not backends or not seeds:
        raise _UsageError("need at least one backend and one seed")

    writer = _ReportWriter(args.report, _REPORT_COLUMNS)
    summaries = []
    try:
        writer.config({
            "command": "bench", "backends": backends, "seeds": seeds,
            "eps": args.eps, "m": m, "mode": args.mode,
            "records": len(records), "nodes": len(g0),
        })
        for backend in backends:
            per_seed_medians = []
            all_ratios = []
            rebuilds = 0
            sketch_rows = None
            for seed in seeds:
                g = g0.copy()
                b = b0.copy()
                emb = build_embedding(g, m)
                state = engine.preprocess(
                    emb.rows, b, backend, args.eps, seed, mode=args.mode,
                    c1=args.c1, c2=args.c2, sketch_size=args.sketch_size)
                sketch_rows = state.sketch_rows
                state, b, wall_ns, ratios = _run_stream(
                    state, g, emb, b, records, 0, writer, backend, seed)
                if wall_ns:
                    per_seed_medians.append(statistics.median(wall_ns))
                all_ratios.extend(ratios)
                rebuilds += state.rebuild_count
            med = float(statistics.median(per_seed_medians)) \
                if per_seed_medians else 0.0
            quantiles = {}
            if all_ratios:
                srt = sorted(all_ratios)
                for q in (0.5, 0.9, 1.0):
                    quantiles["p%d" % round(q * 100)] = \
                        srt[min(len(srt) - 1, int(q * (len(srt) - 1)))]
            summary = {
                "backend": backend, "median_wall_ns": med,
                "ratio_quantiles": quantiles, "rebuilds": rebuilds,
                "sketch_rows": sketch_rows,
            }
            summaries.append(summary)
            writer.summary(summary)
            print("%s: median update %.0f ns, sketch rows %s, rebuilds %d"
                  % (backend, med, sketch_rows, rebuilds))
            if quantiles:
                print("%s: ratio p50 %.6f p90 %.6f max %.6f"
                      % (backend, quantiles["p50"], quantiles["p90"],
                         quantiles["p100"]))
        # The two sketches trade off differently: sampled-transform size
        # grows with ln n, sparse-sketch size with 1/eps^2.
        crossover = ("regime: ln(n)=%.3f vs 1/eps=%.3f; "
                     % (np.log(max(len(g0), 2)), 1.0 / args.eps))
        by_time = sorted((s["median_wall_ns"], s["backend"])
                         for s in summaries if s["median_wall_ns"] > 0)
        if by_time:
            crossover += "fastest backend here: %s" % by_time[0][1]
        else:
            crossover += "no timed updates"
        print(crossover)
        writer.summary({"crossover": crossover})
    finally:
        writer.close()
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="dynareg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common_solver_flags(p):
        p.add_argument("--backend", choices=engine.BACKENDS, default="srht")
        p.add_argument("--eps", type=float, default=0.5)
        p.add_argument("--m", type=int, default=None,
                       help="embedding width; defaults to the graph header")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=("paper-exact", "practical"),
                       default="practical")
        p.add_argument("--c1", type=float, default=10.0)
        p.add_argument("--c2", type=float, default=4.0)
        p.add_argument("--sketch-size", type=int, default=None,
                       help="override the computed sketch height")

    p = sub.add_parser("preprocess", help="build and save a solver state")
    p.add_argument("graph")
    p.add_argument("values")
    common_solver_flags(p)
    p.add_argument("--out", default=None, help="state file to write")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("replay", help="apply an update stream to a state")
    p.add_argument("state")
    p.add_argument("updates")
    p.add_argument("--verify-every", type=int, default=0,
                   help="run a consistency check every K updates")
    p.add_argument("--out", default=None, help="state file to write")
    p.add_argument("--report", default=None,
                   help="report path prefix (.jsonl and .csv)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="compare backends over one stream")
    p.add_argument("graph")
    p.add_argument("values")
    p.add_argument("updates")
    common_solver_flags(p)
    p.add_argument("--backends", default="srht,countsketch,exact",
                   help="comma-separated backend list")
    p.add_argument("--seeds", default="0",
                   help="comma-separated seed list")
    p.add_argument("--report", default=None,
                   help="report path prefix (.jsonl and .csv)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="consistency-check a saved state")
    p.add_argument("state")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    try:
        _configure_logging()
        parser = _build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except _ConsistencyError as exc:
        print("consistency failure: %s" % exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
