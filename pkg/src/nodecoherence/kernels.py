"""Hot-loop kernels with backend selection at import time.

The compiled Cython module is used when it was built; otherwise, or when
``NODECOHERENCE_PURE_PYTHON=1`` is set, the pure-Python versions are used.
``BACKEND`` names the active one.
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("NODECOHERENCE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend forced by environment")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

BACKENDS = {"python": _pykernels}
if BACKEND == "cython":
    BACKENDS["cython"] = _impl


def bfs_distances(indptr, indices, sources, backend=None):
    """Hop distances (int32, -1 when unreachable), one row per source."""
    impl = BACKENDS[backend] if backend else _impl
    return impl.bfs_distances(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        np.ascontiguousarray(sources, dtype=np.int64),
    )


def count_inversions(values, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.count_inversions(np.ascontiguousarray(values, dtype=np.float64))


def _tie_pairs(sorted_values):
    """Sum of t*(t-1)/2 over runs of equal values in a sorted array."""
    if sorted_values.size == 0:
        return 0
    breaks = np.flatnonzero(np.diff(sorted_values) != 0)
    runs = np.diff(np.concatenate(([0], breaks + 1, [sorted_values.size])))
    return int(np.sum(runs * (runs - 1) // 2))


def kendall_tau_b(x, y, backend=None) -> float:
    """Tie-corrected Kendall rank correlation in O(n log n).

    Returns NaN when either sequence is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n != y.size:
        raise ValueError("x and y must have equal length")
    n0 = n * (n - 1) // 2
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n1 = _tie_pairs(xs)
    # joint ties: runs where both x and y are equal
    same = np.concatenate(([False], (np.diff(xs) == 0) & (np.diff(ys) == 0)))
    starts = np.flatnonzero(~same)
    runs = np.diff(np.concatenate((starts, [n]))) if n else np.array([], dtype=np.int64)
    n3 = int(np.sum(runs * (runs - 1) // 2))
    discordant = count_inversions(ys, backend)
    n2 = _tie_pairs(np.sort(ys))
    denom = (n0 - n1) * (n0 - n2)
    if denom == 0:
        return float("nan")
    return float((n0 - n1 - n2 + n3 - 2 * discordant) / np.sqrt(float(denom)))
