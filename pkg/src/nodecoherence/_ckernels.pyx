# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def bfs_distances(const long long[::1] indptr, const long long[::1] indices,
                  const long long[::1] sources):
    """Hop distances from each source; -1 marks unreachable nodes."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t ns = sources.shape[0]
    out = np.full((ns, n), -1, dtype=np.int32)
    cdef int[:, ::1] dist = out
    cdef long long[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t s, head, tail, j
    cdef long long u, v
    cdef int du
    with nogil:
        for s in range(ns):
            head = 0
            tail = 1
            queue[0] = sources[s]
            dist[s, sources[s]] = 0
            while head < tail:
                u = queue[head]
                head += 1
                du = dist[s, u] + 1
                for j in range(indptr[u], indptr[u + 1]):
                    v = indices[j]
                    if dist[s, v] < 0:
                        dist[s, v] = du
                        queue[tail] = v
                        tail += 1
    return out


cdef long long _merge_count(double[::1] a, double[::1] buf, Py_ssize_t lo,
                            Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t mid, i, j, k
    cdef long long swaps = 0
    if hi - lo < 2:
        return 0
    mid = (lo + hi) // 2
    swaps += _merge_count(a, buf, lo, mid)
    swaps += _merge_count(a, buf, mid, hi)
    i = lo
    j = mid
    k = lo
    while i < mid and j < hi:
        if a[j] < a[i]:
            buf[k] = a[j]
            swaps += mid - i
            j += 1
        else:
            buf[k] = a[i]
            i += 1
        k += 1
    while i < mid:
        buf[k] = a[i]
        i += 1
        k += 1
    while j < hi:
        buf[k] = a[j]
        j += 1
        k += 1
    for k in range(lo, hi):
        a[k] = buf[k]
    return swaps


def count_inversions(values):
    """Number of pairs i < j with values[i] > values[j] (ties are not inversions)."""
    cdef double[::1] a = np.array(values, dtype=np.float64, copy=True)
    cdef double[::1] buf = np.empty(a.shape[0], dtype=np.float64)
    cdef long long swaps
    with nogil:
        swaps = _merge_count(a, buf, 0, a.shape[0])
    return int(swaps)
