"""Kernel path selection.

The environment variable ``DYNAREG_KERNELS`` picks the implementation of
the hot numeric loops at import time:

* ``numba`` -- require the jitted kernels, fail if numba is unavailable
* ``numpy`` -- force the pure-numpy fallback
* ``auto``  -- default; jitted when numba imports, fallback otherwise

Both paths compute identical floating point results; see
``benchmarks/bench_kernels.py`` for a speed comparison.
"""

from __future__ import annotations

import os

_choice = os.environ.get("DYNAREG_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        "DYNAREG_KERNELS must be 'auto', 'numba' or 'numpy', got %r" % _choice
    )

if _choice == "numpy":
    from dynareg import _kernels_numpy as _impl

    ACTIVE = "numpy"
elif _choice == "numba":
    from dynareg import _kernels_numba as _impl

    ACTIVE = "numba"
else:
    try:
        from dynareg import _kernels_numba as _impl

        ACTIVE = "numba"
    except ImportError:
        from dynareg import _kernels_numpy as _impl

        ACTIVE = "numpy"

fwht_inplace = _impl.fwht_inplace
countsketch_accumulate = _impl.countsketch_accumulate
