"""Embedding matrices: eigendecomposition synthesis, shuffled nulls, file I/O
and the distance primitives used by every scoring method."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import NodeReferenceError, NumericalError, ParameterError, ParseError
from .graph import Graph, normalized_adjacency_with_self_loops
from .relations import SimilarityMatrix

log = logging.getLogger(__name__)

EXHAUSTIVE_PAIR_LIMIT = 2000
_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    values: np.ndarray
    node_ids: tuple[str, ...] | None = None
    source: str = "array"
    normalized: bool = False
    zero_rows: int = 0

    def __post_init__(self):
        z = np.array(self.values, dtype=np.float64)
        if z.ndim != 2:
            raise ParameterError(f"embedding must be 2-D, got shape {z.shape}")
        if self.node_ids is not None and len(self.node_ids) != z.shape[0]:
            raise ParameterError(f"{len(self.node_ids)} node ids for {z.shape[0]} rows")
        z.setflags(write=False)
        object.__setattr__(self, "values", z)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _as_embedding(z) -> EmbeddingMatrix:
    return z if isinstance(z, EmbeddingMatrix) else EmbeddingMatrix(z)


# ---------------------------------------------------------------------------
# eigendecomposition synthesis


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Full decomposition of a symmetrized similarity matrix, eigenvalues
    sorted descending by signed value. Prefixes give every lower dimension."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clamped_fraction: float
    label: str = ""

    def embedding(self, d: int, node_ids=None) -> EmbeddingMatrix:
        n = self.eigenvalues.size
        if not 1 <= d <= n:
            raise ParameterError(f"dimension d={d} outside [1, {n}]")
        scale = np.sqrt(np.clip(self.eigenvalues[:d], 0.0, None))
        return EmbeddingMatrix(self.eigenvectors[:, :d] * scale, node_ids,
                               source=f"evd:{self.label},{d}")


def evd_basis(s) -> EigenBasis:
    """Eigendecomposition of ``(S + S^T) / 2`` with a deterministic sign per
    eigenvector (its largest-magnitude entry is made positive)."""
    if isinstance(s, SimilarityMatrix):
        label = s.relation.name
        m = s.symmetrized()
    else:
        label = "matrix"
        m = np.asarray(s, dtype=np.float64)
        m = 0.5 * (m + m.T)
    try:
        lam, u = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of {label} failed: {exc}") from None
    order = np.argsort(-lam, kind="stable")
    lam, u = lam[order], u[:, order]
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    norm = np.abs(lam).max(initial=0.0)
    resid = np.linalg.norm(m @ u - u * lam, axis=0)
    if np.any(resid > _RESIDUAL_TOL * max(norm, np.finfo(float).tiny)):
        raise NumericalError(f"eigenpair residual {resid.max():.3e} too large for {label}")
    total = np.abs(lam).sum()
    clamped = float(np.abs(lam[lam < 0]).sum() / total) if total > 0 else 0.0
    u.setflags(write=False)
    lam.setflags(write=False)
    return EigenBasis(lam, u, clamped, label)


def generate_evd_embedding(s, d: int, node_ids=None) -> EmbeddingMatrix:
    """``U[:, :d] * sqrt(max(lambda[:d], 0))`` from the symmetrized matrix."""
    n = s.n if isinstance(s, SimilarityMatrix) else np.asarray(s).shape[0]
    if not 1 <= d <= n:
        raise ParameterError(f"dimension d={d} outside [1, {n}]")
    return evd_basis(s).embedding(d, node_ids)


# ---------------------------------------------------------------------------
# distances


def normalize_rows(z) -> EmbeddingMatrix:
    z = _as_embedding(z)
    if z.normalized:
        return z
    v = z.values
    norm = np.linalg.norm(v, axis=1, keepdims=True)
    zero = int(np.count_nonzero(norm.ravel() == 0))
    if zero:
        log.warning("%d zero embedding row(s) left unnormalized", zero)
    out = np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)
    return EmbeddingMatrix(out, z.node_ids, z.source, normalized=True, zero_rows=zero)


def pairwise_distance(z, u: int, v: int) -> float:
    v_ = _as_embedding(z).values
    return float(np.linalg.norm(v_[u] - v_[v]))


def distances_from(z, u: int, targets) -> np.ndarray:
    v_ = _as_embedding(z).values
    return np.linalg.norm(v_[np.asarray(targets)] - v_[u], axis=1)


def pair_distances(z, us, vs) -> np.ndarray:
    v_ = _as_embedding(z).values
    return np.linalg.norm(v_[np.asarray(us)] - v_[np.asarray(vs)], axis=1)


def sample_pairs(n: int, count: int, rng, ordered=False):
    """Uniform distinct pairs ``u != v`` (unordered unless ``ordered``), sorted
    for reproducibility. Enumerates all pairs when there are at most ``count``."""
    total = n * (n - 1) if ordered else n * (n - 1) // 2
    if total <= count:
        if ordered:
            u, v = np.nonzero(~np.eye(n, dtype=bool))
            return u, v
        return np.triu_indices(n, 1)
    picked = np.sort(rng.choice(total, size=count, replace=False))
    if ordered:
        u = picked // (n - 1)
        v = picked % (n - 1)
        return u, v + (v >= u)
    # unordered index -> (u, v) with u < v, row-major over the upper triangle
    rows = np.arange(n, dtype=np.int64)
    starts = rows * (2 * n - rows - 1) // 2
    u = np.searchsorted(starts, picked, side="right") - 1
    v = picked - starts[u] + u + 1
    return u, v


def distance_std(z, sample_size: int = 100_000, seed: int = 0,
                 exhaustive_limit: int = EXHAUSTIVE_PAIR_LIMIT) -> float:
    """Population standard deviation of pairwise embedding distances.

    Exhaustive (and order-independent, so row permutations give a
    bit-identical result) when ``n <= exhaustive_limit``; otherwise estimated
    from ``sample_size`` uniform unordered pairs.
    """
    v = _as_embedding(z).values
    n = v.shape[0]
    if n < 2:
        raise ParameterError("distance_std needs at least two rows")
    if n <= exhaustive_limit:
        d = np.sort(pdist(v))
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5D]))
        u, w = sample_pairs(n, sample_size, rng)
        d = np.sort(pair_distances(v, u, w))
    return float(np.std(d))


# ---------------------------------------------------------------------------
# nulls and demo generator


def shuffle_embedding(z, seed: int) -> EmbeddingMatrix:
    """Rows reassigned to nodes by a seeded uniform permutation."""
    z = _as_embedding(z)
    perm = np.random.default_rng(seed).permutation(z.n)
    return EmbeddingMatrix(z.values[perm], z.node_ids, f"shuffle:{seed}", z.normalized, z.zero_rows)


_RP_WEIGHTS = (1.0, 1.0, 0.5)


def demo_rp_embedding(g: Graph, d: int, seed: int) -> EmbeddingMatrix:
    """Sparse random projection of normalized-adjacency powers, L2-normalized.

    Only a self-contained demo generator; not a faithful FastRP.
    """
    if d < 1:
        raise ParameterError(f"dimension d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    r = rng.choice(np.array([-1.0, 0.0, 1.0]), size=(g.num_nodes, d), p=[1 / 6, 2 / 3, 1 / 6])
    nadj = normalized_adjacency_with_self_loops(g)
    z = np.zeros_like(r)
    power = r
    for w in _RP_WEIGHTS:
        power = nadj @ power
        z += w * power
    out = normalize_rows(EmbeddingMatrix(z, g.node_ids))
    return EmbeddingMatrix(out.values, g.node_ids, f"demo-rp:{seed}", True, out.zero_rows)


# ---------------------------------------------------------------------------
# file I/O


def save_embedding(z: EmbeddingMatrix, path) -> None:
    z = _as_embedding(z)
    ids = z.node_ids or tuple(str(i) for i in range(z.n))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"e{j + 1}" for j in range(z.dim)])
        for nid, row in zip(ids, z.values):
            w.writerow([nid] + [repr(float(x)) for x in row])


def load_embedding(path, graph: Graph | None = None) -> EmbeddingMatrix:
    """Read a ``node,e1,...,ed`` table; with ``graph`` rows are reordered to
    its node indices and must cover exactly its node ids."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][0].strip() != "node":
        raise ParseError("header must start with 'node'", path, 1)
    width = len(rows[0])
    if width < 2:
        raise ParseError("embedding table has no value columns", path, 1)
    ids, vals = [], []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", path, lineno)
        try:
            vals.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        ids.append(row[0].strip())
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate node id in embedding table", path)
    z = np.array(vals, dtype=np.float64).reshape(len(ids), width - 1)
    source = f"file:{path.name}"
    if graph is None:
        return EmbeddingMatrix(z, tuple(ids), source)
    pos = {nid: i for i, nid in enumerate(ids)}
    extra = [nid for nid in ids if nid not in graph._index]
    if extra:
        raise NodeReferenceError(f"{path}: unknown node id {extra[0]!r}")
    missing = [nid for nid in graph.node_ids if nid not in pos]
    if missing:
        raise NodeReferenceError(f"{path}: missing embedding for node {missing[0]!r}")
    order = np.array([pos[nid] for nid in graph.node_ids], dtype=np.int64)
    return EmbeddingMatrix(z[order], graph.node_ids, source)
