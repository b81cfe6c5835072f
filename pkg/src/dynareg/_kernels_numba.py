"""Numba-jitted implementations of the hot numeric loops."""

from __future__ import annotations

from numba import njit


@njit(cache=True)
def fwht_inplace(a):
    n, k = a.shape
    h = 1
    while h < n:
        for start in range(0, n, 2 * h):
            for i in range(start, start + h):
                for j in range(k):
                    x = a[i, j]
                    y = a[i + h, j]
                    a[i, j] = x + y
                    a[i + h, j] = x - y
        h *= 2


@njit(cache=True)
def countsketch_accumulate(rows, signs, mat, out):
    n, k = mat.shape
    for i in range(n):
        r = rows[i]
        s = signs[i]
        for j in range(k):
            out[r, j] += s * mat[i, j]
