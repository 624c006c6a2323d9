"""Seeded stochastic block model graphs with block-correlated attributes and labels."""

import numpy as np

from .graph import Graph


def sbm_graph(sizes=(50, 50, 50, 50), p_in=0.12, p_out=0.01, seed=0, n_features=16,
              label_noise=0.1, attr_noise=0.6) -> Graph:
    """Undirected SBM. Labels are the blocks with a ``label_noise`` fraction
    reassigned at random; attributes are nonnegative, drawn around a random
    per-block centroid."""
    rng = np.random.default_rng(seed)
    sizes = np.asarray(sizes, dtype=np.int64)
    n = int(sizes.sum())
    block = np.repeat(np.arange(sizes.size), sizes)
    prob = np.where(block[:, None] == block[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    edges = np.argwhere(upper)

    labels = block.copy()
    flip = rng.random(n) < label_noise
    labels[flip] = rng.integers(0, sizes.size, size=int(flip.sum()))

    attributes = None
    if n_features:
        centroids = rng.random((sizes.size, n_features))
        attributes = np.abs(centroids[block] + attr_noise * rng.standard_normal((n, n_features)))

    node_ids = tuple(f"n{i}" for i in range(n))
    names = tuple(str(c) for c in range(sizes.size))
    return Graph(node_ids, edges, attributes, labels, names)


def desk_graph(seed=7) -> Graph:
    """The 200-node, four-block test graph used by the acceptance suite."""
    return sbm_graph(seed=seed)
