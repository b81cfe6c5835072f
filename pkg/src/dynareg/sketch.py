"""Randomized sketching operators.

Two families are provided.  The sampled Hadamard sketch flips row signs,
mixes with a normalized Walsh-Hadamard transform and then samples rows
with replacement; zero padding brings the row count up to a power of
two.  The count sketch routes each input row to one output row with a
random sign, which makes single-column changes O(1).

Both are built from an integer seed through a fixed generator algorithm
(numpy ``PCG64``) with a documented draw order, so equal seeds produce
bitwise-equal sketches and tests can pin expected draws.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from dynareg import _kernels

__all__ = [
    "SrhtSketch",
    "CountSketch",
    "srht_sample_count",
    "srht_new",
    "srht_apply",
    "srht_column",
    "countsketch_sample_count",
    "countsketch_new",
    "countsketch_restore",
    "countsketch_apply",
    "countsketch_add_column",
    "countsketch_remove_column",
]

log = logging.getLogger("dynareg.sketch")

#: Default multiplier of the practical sampled-Hadamard sizing rule.
DEFAULT_SRHT_C1 = 10.0

#: Default multiplier of the practical count-sketch sizing rule.
DEFAULT_COUNTSKETCH_C2 = 4.0


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


class SrhtSketch:
    """Sampled randomized Hadamard operator for a fixed logical row count.

    Attributes
    ----------
    n : int
        Logical row count of the operand it applies to.
    n_padded : int
        Power of two with ``n_padded / 2 < max(n, 1) <= n_padded``.
    num_samples : int
        Number of sampled rows, the height of the sketch.
    signs : ndarray, shape (n_padded,)
        The +-1 diagonal, stored as float64.
    samples : ndarray, shape (num_samples,)
        Sampled row indices, drawn uniformly with replacement.
    scale : float
        ``sqrt(n_padded / num_samples)`` exactly.
    seed : int
    """

    def __init__(self, n, n_padded, num_samples, signs, samples, scale, seed):
        self.n = int(n)
        self.n_padded = int(n_padded)
        self.num_samples = int(num_samples)
        self.signs = signs
        self.samples = samples
        self.scale = float(scale)
        self.seed = int(seed)


def srht_sample_count(n: int, m: int, eps: float, mode: str = "practical",
                      c1: float = DEFAULT_SRHT_C1) -> int:
    """Sampled row count targeting a ``(1 + eps)`` residual guarantee.

    ``mode="paper_exact"`` evaluates the conservative worst-case sizing
    rule with its explicit constants; ``mode="practical"`` scales
    ``m * (ln m * ln n + ln n / eps)`` by ``c1``.  The result is rounded
    up, floored at 1, and clamped to the padded dimension (with a logged
    warning) since sampling more rows than exist adds nothing.

    Raises
    ------
    ValueError
        If ``eps`` is outside the open interval (0, 1), sizes are not
        positive, or the mode is unknown.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly between 0 and 1, got %r" % eps)
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive, got n=%d m=%d" % (n, m))
    if mode == "paper_exact":
        t = math.log(40.0 * n * m)
        bound = max(
            48.0 ** 2 * m * t * math.log(100.0 ** 2 * m * t),
            40.0 * m * t / eps,
        )
    elif mode == "practical":
        bound = c1 * m * (math.log(m) * math.log(n) + math.log(n) / eps)
    else:
        raise ValueError("mode must be 'paper_exact' or 'practical', got %r" % mode)
    count = max(int(math.ceil(bound)), 1)
    n_padded = _next_pow2(n)
    if count > n_padded:
        log.warning(
            "sample count %d exceeds padded dimension %d, clamping", count, n_padded
        )
        count = n_padded
    return count


def srht_new(n: int, num_samples: int, seed: int) -> SrhtSketch:
    """Construct a sketch for ``n`` logical rows.

    Draw order is fixed: the +-1 diagonal first, then the sampled row
    indices.
    """
    if n < 0:
        raise ValueError("row count must be non-negative, got %d" % n)
    if num_samples < 1:
        raise ValueError("num_samples must be positive, got %d" % num_samples)
    n_padded = _next_pow2(max(n, 1))
    rng = np.random.Generator(np.random.PCG64(seed))
    signs = rng.integers(0, 2, size=n_padded).astype(np.float64) * 2.0 - 1.0
    samples = rng.integers(0, n_padded, size=num_samples).astype(np.int64)
    scale = math.sqrt(n_padded / num_samples)
    return SrhtSketch(n, n_padded, num_samples, signs, samples, scale, seed)


def srht_apply(s: SrhtSketch, mat: np.ndarray) -> np.ndarray:
    """Apply the sketch to a matrix or vector with ``s.n`` rows.

    Rows are zero-padded to ``n_padded``, sign-flipped, mixed with the
    normalized Walsh-Hadamard butterfly column by column, and the sampled
    rows are returned times ``scale``.  A 1-d input yields a 1-d output.
    """
    arr = np.asarray(mat, dtype=np.float64)
    vector = arr.ndim == 1
    if vector:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != s.n:
        raise ValueError(
            "operand has shape %r, expected %d rows" % (np.shape(mat), s.n)
        )
    padded = np.zeros((s.n_padded, arr.shape[1]))
    padded[: s.n] = arr
    padded *= s.signs[:, None]
    _kernels.fwht_inplace(padded)
    padded *= 1.0 / math.sqrt(s.n_padded)
    out = padded[s.samples] * s.scale
    return out[:, 0] if vector else out


def srht_column(s: SrhtSketch, i: int) -> np.ndarray:
    """Column ``i`` of the sketch operator in O(num_samples) time.

    Entry ``t`` equals ``scale * signs[i] * (-1)**parity(samples[t] & i)
    / sqrt(n_padded)``; no transform matrix is materialized.
    """
    if not 0 <= i < s.n:
        raise ValueError("column index %d outside [0, %d)" % (i, s.n))
    parity = np.bitwise_count(np.bitwise_and(s.samples, np.int64(i))) & 1
    col_signs = 1.0 - 2.0 * parity.astype(np.float64)
    return (s.scale * s.signs[i] / math.sqrt(s.n_padded)) * col_signs


class CountSketch:
    """Sparse sign sketch with exactly one signed entry per column.

    Attributes
    ----------
    num_rows : int
        Sketch height.
    n : int
        Current number of columns (input rows it applies to).
    col_rows : ndarray, shape (n,)
        Output row index of each column.
    col_signs : ndarray, shape (n,)
        The +-1 sign of each column, stored as float64.
    seed : int
    init_cols : int
        Columns drawn in the constructing batch.
    extra_draws : int
        Single-column draws made since construction.  Together with
        ``init_cols`` this pins the position of the random stream, which
        is how a restored sketch agrees with a live one on future draws.
    """

    def __init__(self, num_rows, n, col_rows, col_signs, seed,
                 init_cols, extra_draws, rng):
        self.num_rows = int(num_rows)
        self.n = int(n)
        self.col_rows = col_rows
        self.col_signs = col_signs
        self.seed = int(seed)
        self.init_cols = int(init_cols)
        self.extra_draws = int(extra_draws)
        self._rng = rng


def countsketch_sample_count(m: int, eps: float, mode: str = "practical",
                             c2: float = DEFAULT_COUNTSKETCH_C2) -> int:
    """Sketch height targeting a ``(1 + eps)`` residual guarantee.

    ``mode="paper_form"`` evaluates
    ``(m^2 / eps^2) * (ln(m / eps) + 1)^6``; ``mode="practical"`` uses
    ``c2 * m^2 / eps^2``.  Rounded up, floored at 1.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly between 0 and 1, got %r" % eps)
    if m < 1:
        raise ValueError("m must be positive, got %d" % m)
    if mode == "paper_form":
        bound = (m * m / (eps * eps)) * (math.log(m / eps) + 1.0) ** 6
    elif mode == "practical":
        bound = c2 * m * m / (eps * eps)
    else:
        raise ValueError("mode must be 'paper_form' or 'practical', got %r" % mode)
    return max(int(math.ceil(bound)), 1)


def countsketch_new(n: int, num_rows: int, seed: int) -> CountSketch:
    """Construct a sketch with ``n`` columns.

    Draw order is fixed: all row indices as one batch, then all signs as
    one batch.  ``n = 0`` is valid and draws nothing.
    """
    if num_rows < 1:
        raise ValueError("num_rows must be positive, got %d" % num_rows)
    if n < 0:
        raise ValueError("column count must be non-negative, got %d" % n)
    rng = np.random.Generator(np.random.PCG64(seed))
    col_rows = rng.integers(0, num_rows, size=n).astype(np.int64)
    col_signs = rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0
    return CountSketch(num_rows, n, col_rows, col_signs, seed, n, 0, rng)


def countsketch_restore(num_rows, n, col_rows, col_signs, seed,
                        init_cols, extra_draws) -> CountSketch:
    """Rebuild a sketch from serialized fields.

    The random stream is replayed to its recorded position so the next
    draw matches what the live sketch would have produced.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    rng.integers(0, num_rows, size=init_cols)
    rng.integers(0, 2, size=init_cols)
    for _ in range(extra_draws):
        rng.integers(0, num_rows)
        rng.integers(0, 2)
    return CountSketch(num_rows, n, col_rows, col_signs, seed,
                       init_cols, extra_draws, rng)


def countsketch_apply(s: CountSketch, mat: np.ndarray) -> np.ndarray:
    """Apply the sketch in a single pass over the input rows.

    A 1-d input yields a 1-d output.
    """
    arr = np.asarray(mat, dtype=np.float64)
    vector = arr.ndim == 1
    if vector:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != s.n:
        raise ValueError(
            "operand has shape %r, expected %d rows" % (np.shape(mat), s.n)
        )
    out = np.zeros((s.num_rows, arr.shape[1]))
    if s.n:
        _kernels.countsketch_accumulate(
            s.col_rows, s.col_signs, np.ascontiguousarray(arr), out
        )
    return out[:, 0] if vector else out


def countsketch_add_column(s: CountSketch, at: int) -> tuple[int, float]:
    """Append a column and return its ``(row, sign)``.

    ``at`` must equal ``s.n``; columns can only be appended at the end.
    """
    if at != s.n:
        raise ValueError("columns append at the end: at=%d, n=%d" % (at, s.n))
    row = int(s._rng.integers(0, s.num_rows))
    sign = float(s._rng.integers(0, 2)) * 2.0 - 1.0
    s.col_rows = np.append(s.col_rows, np.int64(row))
    s.col_signs = np.append(s.col_signs, sign)
    s.n += 1
    s.extra_draws += 1
    return row, sign


def countsketch_remove_column(s: CountSketch, at: int) -> tuple[int, float]:
    """Remove column ``at``, shifting later columns down by one.

    Returns the removed ``(row, sign)``.  The random stream position is
    unaffected.
    """
    if not 0 <= at < s.n:
        raise ValueError("column index %d outside [0, %d)" % (at, s.n))
    row = int(s.col_rows[at])
    sign = float(s.col_signs[at])
    s.col_rows = np.delete(s.col_rows, at)
    s.col_signs = np.delete(s.col_signs, at)
    s.n -= 1
    return row, sign
