"""Reference interpretation methods: Kendall rank test and property classification.

Both expose ``score(z, s) -> float`` like :class:`nodecoherence.nci.NCIScorer`.
"""

from __future__ import annotations

import numpy as np
from sklearn.linear_model import LogisticRegression

from .embeddings import normalize_rows, pair_distances, sample_pairs
from .errors import InsufficientDataError, ParameterError, UndefinedCorrelationError
from .kernels import kendall_tau_b
from .nci import CoherenceParams, query_nodes, similar_and_intruders
from .relations import SimilarityMatrix

_STREAM_KENDALL = 31
_STREAM_PC_PAIRS = 32
_STREAM_PC_BALANCE = 33
_STREAM_PC_SPLIT = 34

MIN_PAIRS_PER_CLASS = 20


def _kendall_pairs(s: SimilarityMatrix, pair_sample: int, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_KENDALL]))
    if s.rows is None:
        return sample_pairs(s.n, pair_sample, rng, ordered=not s.symmetric)
    # row block: ordered pairs (u in rows, v != u)
    rows = np.sort(s.rows)
    n = s.n
    total = rows.size * (n - 1)
    if total <= pair_sample:
        u = np.repeat(rows, n)
        v = np.tile(np.arange(n), rows.size)
        keep = u != v
        return u[keep], v[keep]
    flat = np.sort(rng.choice(total, size=pair_sample, replace=False))
    u = rows[flat // (n - 1)]
    v = flat % (n - 1)
    return u, v + (v >= u)


def kendall_tau_score(z, s: SimilarityMatrix, pair_sample: int = 100_000, seed: int = 0,
                      pairs=None) -> float:
    """Tau-b between ``s(u, v)`` and ``-d(u, v)`` over sampled node pairs."""
    if s.n < 2:
        raise ParameterError("kendall_tau_score needs at least two nodes")
    zn = normalize_rows(z)
    u, v = pairs if pairs is not None else _kendall_pairs(s, pair_sample, seed)
    sims = s.values_at(u, v)
    dist = pair_distances(zn, u, v)
    tau = kendall_tau_b(sims, -dist)
    if np.isnan(tau):
        if np.ptp(sims) == 0 and np.ptp(dist) == 0:
            raise UndefinedCorrelationError(
                f"relation {s.relation.name}: similarities and distances are both constant")
        # one side constant: no ordering information, no association
        return 0.0
    return tau


class KendallTauScorer:
    name = "KendallTau"

    def __init__(self, pair_sample: int = 100_000, seed: int = 0):
        self.pair_sample = int(pair_sample)
        self.seed = int(seed)
        self._pairs = {}

    def score(self, z, s: SimilarityMatrix, sigma=None) -> float:
        key = (s.n, s.symmetric, None if s.rows is None else s.rows.tobytes())
        pairs = self._pairs.get(key)
        if pairs is None:
            pairs = self._pairs[key] = _kendall_pairs(s, self.pair_sample, self.seed)
        return kendall_tau_score(z, s, pairs=pairs)


# ---------------------------------------------------------------------------
# property classification


def pair_features(z: np.ndarray, u, v) -> np.ndarray:
    """``|z_u - z_v|`` concatenated with ``z_u * z_v``; symmetric in (u, v)."""
    zu, zv = z[u], z[v]
    return np.hstack([np.abs(zu - zv), zu * zv])


def pair_labels(s: SimilarityMatrix, p: CoherenceParams, pairs_per_query: int = 10):
    """Balanced (query, node, label) triples: label 1 for similar nodes, 0 for intruders."""
    us, vs, ys = [], [], []
    for u in query_nodes(s, p):
        sim, intr, _ = similar_and_intruders(s, int(u), p)
        if sim.size == 0 or intr.size == 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([p.seed, _STREAM_PC_PAIRS, int(u)]))
        pos = rng.choice(sim, size=min(pairs_per_query, sim.size), replace=False)
        neg = rng.choice(intr, size=min(pairs_per_query, intr.size), replace=False)
        us += [int(u)] * (pos.size + neg.size)
        vs += pos.tolist() + neg.tolist()
        ys += [1] * pos.size + [0] * neg.size
    us, vs, ys = (np.array(a, dtype=np.int64) for a in (us, vs, ys))
    pos_idx, neg_idx = np.flatnonzero(ys == 1), np.flatnonzero(ys == 0)
    m = min(pos_idx.size, neg_idx.size)
    if m < MIN_PAIRS_PER_CLASS:
        raise InsufficientDataError(
            f"relation {s.relation.name}: only {m} pairs per class (need {MIN_PAIRS_PER_CLASS})")
    rng = np.random.default_rng(np.random.SeedSequence([p.seed, _STREAM_PC_BALANCE]))
    keep = np.sort(np.concatenate([rng.choice(pos_idx, m, replace=False),
                                   rng.choice(neg_idx, m, replace=False)]))
    return us[keep], vs[keep], ys[keep]


def holdout_accuracy(x: np.ndarray, y: np.ndarray, seed: int = 0, l2: float = 1e-2,
                     tol: float = 1e-6, test_fraction: float = 0.2) -> float:
    """Fit an L2-regularized logistic regression on a seeded 80/20 split and
    return held-out accuracy."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_PC_SPLIT]))
    perm = rng.permutation(y.size)
    n_test = max(1, int(round(test_fraction * y.size)))
    test, train = perm[:n_test], perm[n_test:]
    if np.unique(y[train]).size < 2:
        raise InsufficientDataError("training split contains a single class")
    # mean log-loss + l2/2 * |w|^2  <=>  sklearn's C = 1 / (l2 * n_train)
    clf = LogisticRegression(C=1.0 / (l2 * train.size), tol=tol, max_iter=10_000)
    clf.fit(x[train], y[train])
    return float(np.mean(clf.predict(x[test]) == y[test]))


def property_classification_score(z, s: SimilarityMatrix, p: CoherenceParams | None = None,
                                  pairs_per_query: int = 10, labels=None) -> float:
    p = p or CoherenceParams()
    zn = normalize_rows(z).values
    u, v, y = labels if labels is not None else pair_labels(s, p, pairs_per_query)
    return holdout_accuracy(pair_features(zn, u, v), y, p.seed)


class PropertyClassScorer:
    name = "PropertyClass"

    def __init__(self, params: CoherenceParams | None = None, pairs_per_query: int = 10):
        self.params = params or CoherenceParams()
        self.pairs_per_query = pairs_per_query
        self._labels = {}

    def score(self, z, s: SimilarityMatrix, sigma=None) -> float:
        key = (s.relation, s.content_hash())
        labels = self._labels.get(key)
        if labels is None:
            labels = self._labels[key] = pair_labels(s, self.params, self.pairs_per_query)
        return property_classification_score(z, s, self.params, labels=labels)
