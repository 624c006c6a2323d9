"""Pure-Python fallbacks for the compiled kernels in ``_ckernels.pyx``."""

from collections import deque

import numpy as np


def bfs_distances(indptr, indices, sources):
    indptr = np.asarray(indptr).tolist()
    indices = np.asarray(indices).tolist()
    n = len(indptr) - 1
    out = np.full((len(sources), n), -1, dtype=np.int32)
    for row, src in enumerate(np.asarray(sources).tolist()):
        dist = [-1] * n
        dist[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                v = indices[j]
                if dist[v] < 0:
                    dist[v] = du
                    queue.append(v)
        out[row] = dist
    return out


def count_inversions(values):
    a = [float(v) for v in values]
    buf = [0.0] * len(a)
    swaps = 0
    width = 1
    n = len(a)
    # bottom-up merge sort
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[j] < a[i]:
                    buf[k] = a[j]
                    swaps += mid - i
                    j += 1
                else:
                    buf[k] = a[i]
                    i += 1
                k += 1
            buf[k:k + mid - i] = a[i:mid]
            k += mid - i
            buf[k:k + hi - j] = a[j:hi]
            a[lo:hi] = buf[lo:hi]
        width *= 2
    return swaps
