"""Dense numeric kernels.

SVD-backed pseudoinverses, rank-one pseudoinverse updates, the normalized
Walsh-Hadamard transform, and minimum-norm least squares.  Everything
works on float64 numpy arrays; matrices are 2-d, vectors 1-d.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from dynareg import _kernels

__all__ = [
    "SvdResult",
    "svd",
    "pinv",
    "pinv_vector",
    "meyer_rank_one_pinv_update",
    "fwht_normalized",
    "least_squares_solve",
]

#: Singular values at or below this fraction of the largest one are
#: treated as zero instead of inverted.
SIGMA_TRUNCATION = 1e-12

#: Relative tolerance of the range-membership tests in the rank-one
#: pseudoinverse update.
MEMBERSHIP_TOL = 1e-10


class SvdResult(NamedTuple):
    """Thin singular value decomposition ``a = u @ diag(sigma) @ vt``."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray


def svd(a: np.ndarray) -> SvdResult:
    """Thin SVD of a tall-or-square matrix.

    Parameters
    ----------
    a : ndarray, shape (n1, n2)
        Input matrix with ``n1 >= n2``.

    Returns
    -------
    SvdResult
        ``u`` is (n1, n2) with orthonormal columns, ``sigma`` is (n2,)
        non-negative and non-increasing, ``vt`` is (n2, n2) orthogonal.

    Raises
    ------
    ValueError
        If the input is not 2-d or has fewer rows than columns.
    numpy.linalg.LinAlgError
        If the underlying decomposition does not converge.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("svd expects a 2-d array, got ndim=%d" % a.ndim)
    if a.shape[0] < a.shape[1]:
        raise ValueError(
            "svd expects at least as many rows as columns, got shape %r"
            % (a.shape,)
        )
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdResult(u, s, vt)


def pinv(a: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse via thin SVD.

    Singular values at or below ``SIGMA_TRUNCATION`` times the largest
    one are dropped rather than inverted.  Wide inputs are transposed,
    inverted and transposed back.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("pinv expects a 2-d array, got ndim=%d" % a.ndim)
    if a.shape[0] < a.shape[1]:
        return pinv(a.T).T
    if a.shape[1] == 0:
        return np.zeros((0, a.shape[0]))
    u, s, vt = svd(a)
    if s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    inv = np.zeros_like(s)
    keep = s > SIGMA_TRUNCATION * s[0]
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def pinv_vector(x: np.ndarray) -> np.ndarray:
    """Pseudoinverse of a vector: ``x / ||x||^2``, with zero mapped to zero."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("pinv_vector expects a 1-d array, got ndim=%d" % x.ndim)
    nrm2 = float(x @ x)
    if nrm2 == 0.0:
        return np.zeros_like(x)
    return x / nrm2


def meyer_rank_one_pinv_update(a: np.ndarray, a_pinv: np.ndarray,
                               c: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Pseudoinverse of ``a + outer(c, d)`` given the pseudoinverse of ``a``.

    The update branches on three predicates: whether ``c`` lies in the
    column space of ``a``, whether ``d`` lies in its row space, and
    whether ``beta = 1 + d @ a_pinv @ c`` vanishes.  Every branch costs a
    handful of matrix-vector products and outer products, so the whole
    update runs in O(n1 * n2) time, cheaper than a fresh decomposition.

    Parameters
    ----------
    a : ndarray, shape (n1, n2)
    a_pinv : ndarray, shape (n2, n1)
        Pseudoinverse of ``a``.  It is trusted as given; any drift in it
        carries over to the result.
    c : ndarray, shape (n1,)
    d : ndarray, shape (n2,)

    Returns
    -------
    ndarray, shape (n2, n1)
        Pseudoinverse of the updated matrix.

    Notes
    -----
    Range membership is decided with relative tolerance
    ``MEMBERSHIP_TOL``: a residual counts as zero when its norm is at
    most that fraction of the norm of the vector being projected.  The
    pseudoinverse is discontinuous across these boundaries, so inputs
    truly on the fence have no numerically stable answer.
    """
    a = np.asarray(a, dtype=np.float64)
    a_pinv = np.asarray(a_pinv, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if a.ndim != 2 or a_pinv.ndim != 2:
        raise ValueError("matrix arguments must be 2-d")
    n1, n2 = a.shape
    if a_pinv.shape != (n2, n1):
        raise ValueError(
            "pseudoinverse shape %r does not match matrix shape %r"
            % (a_pinv.shape, a.shape)
        )
    if c.shape != (n1,):
        raise ValueError("c has shape %r, expected (%d,)" % (c.shape, n1))
    if d.shape != (n2,):
        raise ValueError("d has shape %r, expected (%d,)" % (d.shape, n2))

    k = a_pinv @ c
    h = a_pinv.T @ d
    u = c - a @ k
    v = d - a.T @ h
    beta = 1.0 + float(d @ k)

    u_zero = np.linalg.norm(u) <= MEMBERSHIP_TOL * np.linalg.norm(c)
    v_zero = np.linalg.norm(v) <= MEMBERSHIP_TOL * np.linalg.norm(d)
    beta_zero = abs(beta) <= MEMBERSHIP_TOL * (1.0 + abs(beta - 1.0))

    if not u_zero and not v_zero:
        w1 = float(u @ u)
        w2 = float(v @ v)
        return (a_pinv - np.outer(k, u) / w1 - np.outer(v, h) / w2
                + (beta / (w1 * w2)) * np.outer(v, u))

    if u_zero and not v_zero:
        vv = float(v @ v)
        kk = float(k @ k)
        row = k @ a_pinv
        if beta_zero:
            return a_pinv - np.outer(v, h) / vv - np.outer(k, row) / kk
        sigma = beta * beta + kk * vv
        return a_pinv + (np.outer(v, beta * row - kk * h)
                         - np.outer(k, beta * h + vv * row)) / sigma

    if not u_zero and v_zero:
        uu = float(u @ u)
        hh = float(h @ h)
        col = a_pinv @ h
        if beta_zero:
            return a_pinv - np.outer(k, u) / uu - np.outer(col, h) / hh
        sigma = beta * beta + hh * uu
        return a_pinv + (beta * np.outer(col, u) - hh * np.outer(k, u)
                         - beta * np.outer(k, h) - uu * np.outer(col, h)) / sigma

    if not beta_zero:
        return a_pinv - np.outer(k, h) / beta
    # Both vectors sit inside the ranges and beta = 0, so the rank drops
    # by one; project the killed directions out of the old pseudoinverse.
    # Here d @ k = -1 forces both k and h to be nonzero.
    kk = float(k @ k)
    hh = float(h @ h)
    out = a_pinv - np.outer(k, k @ a_pinv) / kk
    return out - np.outer(out @ h, h) / hh


def fwht_normalized(v: np.ndarray) -> np.ndarray:
    """Normalized Walsh-Hadamard transform of a power-of-two length vector.

    The transform matrix has entries ``(-1)**parity(i & j) / sqrt(n)``
    over 0-based indices, so it is symmetric and orthogonal; applying it
    twice reproduces the input up to rounding.

    Raises
    ------
    ValueError
        If the length is not a positive power of two.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("fwht_normalized expects a 1-d array, got ndim=%d" % v.ndim)
    n = v.shape[0]
    if n == 0 or (n & (n - 1)) != 0:
        raise ValueError("length must be a positive power of two, got %d" % n)
    out = v.reshape(n, 1).copy()
    _kernels.fwht_inplace(out)
    out *= 1.0 / math.sqrt(n)
    return out.ravel()


def least_squares_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution ``pinv(a) @ b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("matrix argument must be 2-d")
    if b.shape != (a.shape[0],):
        raise ValueError(
            "right-hand side has shape %r, expected (%d,)" % (b.shape, a.shape[0])
        )
    return pinv(a) @ b
