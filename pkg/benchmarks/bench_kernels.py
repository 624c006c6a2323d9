"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--nodes 2000] [--items 200000] [--repeat 3]

Prints one line per (kernel, backend) with the best wall time over the
repeats and the speedup of the compiled backend. Both backends are checked
for identical outputs before timing.
"""

import argparse
import time

import numpy as np

from nodecoherence import kernels
from nodecoherence.synthetic import sbm_graph


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=2000)
    ap.add_argument("--sources", type=int, default=200)
    ap.add_argument("--items", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = sorted(kernels.BACKENDS)
    if "cython" not in backends:
        print("compiled backend not built; timing the pure-Python backend only")

    blocks = 4
    g = sbm_graph(sizes=(args.nodes // blocks,) * blocks, p_in=24 / args.nodes,
                  p_out=2 / args.nodes, seed=args.seed, n_features=0)
    a = g.adjacency
    sources = np.arange(min(args.sources, g.num_nodes))
    rng = np.random.default_rng(args.seed)
    x = rng.random(args.items)
    # half the values tied, to exercise the stable merge
    x[: args.items // 2] = np.round(x[: args.items // 2], 2)

    cases = {
        f"bfs ({g.num_nodes} nodes, {g.num_edges} edges, {sources.size} sources)":
            lambda b: kernels.bfs_distances(a.indptr, a.indices, sources, backend=b),
        f"count_inversions ({args.items} items)":
            lambda b: kernels.count_inversions(x, backend=b),
        f"kendall_tau_b ({args.items} items)":
            lambda b: kernels.kendall_tau_b(x, x[::-1].copy(), backend=b),
    }

    for label, fn in cases.items():
        outs = [fn(b) for b in backends]
        for other in outs[1:]:
            assert np.array_equal(np.asarray(outs[0]), np.asarray(other)), label
        times = {b: best_time(lambda: fn(b), args.repeat) for b in backends}
        for b in backends:
            line = f"{label:<58} {b:<7} {times[b] * 1e3:10.2f} ms"
            if b == "cython":
                line += f"   x{times['python'] / times['cython']:.1f}"
            print(line)


if __name__ == "__main__":
    main()
