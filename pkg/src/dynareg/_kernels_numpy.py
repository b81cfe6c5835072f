"""Pure-numpy implementations of the hot numeric loops.

These mirror the jitted versions in ``_kernels_numba`` operation for
operation, in the same order, so the two paths produce bitwise-identical
results on the same input.
"""

from __future__ import annotations

import numpy as np


def fwht_inplace(a: np.ndarray) -> None:
    """Unnormalized Walsh-Hadamard butterfly down axis 0 of a 2-d array.

    The row count must be a power of two; columns are transformed
    independently.  No scaling is applied here.
    """
    n = a.shape[0]
    h = 1
    while h < n:
        view = a.reshape(n // (2 * h), 2 * h, a.shape[1])
        top = view[:, :h, :]
        bot = view[:, h:, :]
        diff = top - bot
        top += bot
        bot[:] = diff
        h *= 2


def countsketch_accumulate(rows: np.ndarray, signs: np.ndarray,
                           mat: np.ndarray, out: np.ndarray) -> None:
    """Add ``signs[i] * mat[i]`` into ``out[rows[i]]`` for every input row.

    ``np.add.at`` is unbuffered and walks the rows in ascending order,
    matching the explicit loop in the jitted kernel.
    """
    np.add.at(out, rows, signs[:, None] * mat)
