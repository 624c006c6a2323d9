"""Node-relation similarity matrices and the graph kernels behind them.

Seven relation kinds are supported: link weight, shortest-path proximity,
personalized PageRank, k-hop degree distribution, k-hop label distribution,
raw attribute similarity and k-hop attribute distribution. Every similarity
lies in [0, 1] and self-similarity is fixed at 1.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import CapabilityError, ParameterError, ParseError
from .graph import Graph, normalized_adjacency_with_self_loops

KINDS = ("Link", "SPD", "PageRank", "DegreeDist", "LabelDist", "Attr", "AttrDist")
UNREACHABLE = -1

_PPR_TOL = 1e-10
_PPR_MAX_ITER = 1000
_BFS_CHUNK = 1024


@dataclass(frozen=True)
class RelationSpec:
    kind: str
    k: int = 1
    alpha: float = 0.85

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown relation kind {self.kind!r}; expected one of {KINDS}")
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"{self.kind}: hop count k must be an integer >= 1, got {self.k}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"{self.kind}: alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def name(self) -> str:
        if self.kind == "PageRank":
            return self.kind if self.alpha == 0.85 else f"PageRank@{self.alpha:g}"
        if self.kind in ("DegreeDist", "LabelDist", "AttrDist"):
            return self.kind if self.k == 1 else f"{self.kind}@{self.k}"
        return self.kind

    @property
    def symmetric(self) -> bool:
        return self.kind != "PageRank"

    @classmethod
    def parse(cls, obj) -> "RelationSpec":
        """Build from ``"SPD"``, ``"DegreeDist@2"``, ``"PageRank@0.9"`` or a dict."""
        if isinstance(obj, RelationSpec):
            return obj
        if isinstance(obj, dict):
            return cls(**obj)
        kind, _, arg = str(obj).partition("@")
        if not arg:
            return cls(kind)
        try:
            return cls(kind, alpha=float(arg)) if kind == "PageRank" else cls(kind, k=int(arg))
        except ValueError:
            raise ParameterError(f"cannot parse relation {obj!r}") from None

    def check_capability(self, g: Graph) -> None:
        if self.kind == "LabelDist" and g.labels is None:
            raise CapabilityError(f"relation {self.name} needs node labels; graph has none")
        if self.kind in ("Attr", "AttrDist") and g.attributes is None:
            raise CapabilityError(f"relation {self.name} needs node attributes; graph has none")


def computable_relations(g: Graph) -> list[RelationSpec]:
    out = []
    for kind in KINDS:
        spec = RelationSpec(kind)
        try:
            spec.check_capability(g)
        except CapabilityError:
            continue
        out.append(spec)
    return out


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Similarity values for one relation.

    ``values`` is dense, or CSR for naturally sparse kinds. When ``rows`` is
    given, ``values`` holds only those rows (in that order) against all nodes.
    """

    relation: RelationSpec
    values: np.ndarray | sp.csr_matrix
    symmetric: bool
    rows: np.ndarray | None = None

    def __post_init__(self):
        if self.rows is not None:
            rows = np.asarray(self.rows, dtype=np.int64)
            object.__setattr__(self, "rows", rows)
            object.__setattr__(self, "_pos", {int(r): i for i, r in enumerate(rows)})

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.values)

    @property
    def is_full(self) -> bool:
        return self.rows is None

    def row(self, u: int) -> np.ndarray:
        i = u if self.rows is None else self._pos.get(int(u))
        if i is None:
            raise IndexError(f"row {u} not stored for relation {self.relation.name}")
        if self.is_sparse:
            return self.values.getrow(i).toarray().ravel()
        return np.asarray(self.values[i])

    def has_row(self, u: int) -> bool:
        return self.rows is None or int(u) in self._pos

    def dense(self) -> np.ndarray:
        if self.rows is not None:
            raise ValueError("dense() needs the full matrix, not a row block")
        return self.values.toarray() if self.is_sparse else np.asarray(self.values)

    def symmetrized(self) -> np.ndarray:
        s = self.dense()
        return s if self.symmetric else 0.5 * (s + s.T)

    def as_symmetric(self) -> "SimilarityMatrix":
        """Full matrix with ``(S + S^T) / 2`` values; self when already symmetric."""
        if self.symmetric:
            return self
        vals = self.symmetrized()
        vals.setflags(write=False)
        return SimilarityMatrix(self.relation, vals, True)

    def values_at(self, us, vs) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        if self.rows is not None:
            us = np.array([self._pos[int(u)] for u in us], dtype=np.int64)
        if self.is_sparse:
            return np.asarray(self.values[us, vs]).ravel()
        return self.values[us, vs]

    def content_hash(self) -> str:
        h = hashlib.sha256(self.relation.name.encode())
        if self.rows is not None:
            h.update(self.rows.tobytes())
        if self.is_sparse:
            v = self.values
            h.update(v.indptr.tobytes())
            h.update(v.indices.tobytes())
            h.update(v.data.tobytes())
        else:
            h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# graph kernels


def _row_list(g, rows):
    return np.arange(g.num_nodes) if rows is None else np.asarray(rows, dtype=np.int64)


def all_pairs_shortest_path(g: Graph, sources=None):
    """BFS hop distances from every source plus the graph diameter.

    Unreachable pairs hold ``UNREACHABLE``. The diameter is the largest finite
    distance over all pairs, even when only some source rows are returned.
    """
    adj = g.adjacency
    src = _row_list(g, sources)
    if sources is None:
        dist = kernels.bfs_distances(adj.indptr, adj.indices, src)
        return dist, int(dist.max(initial=0))
    dist = kernels.bfs_distances(adj.indptr, adj.indices, src)
    diameter = 0
    for lo in range(0, g.num_nodes, _BFS_CHUNK):
        block = kernels.bfs_distances(adj.indptr, adj.indices, np.arange(lo, min(lo + _BFS_CHUNK, g.num_nodes)))
        diameter = max(diameter, int(block.max(initial=0)))
    return dist, diameter


def _transition_parts(g):
    deg = g.degrees.astype(np.float64)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    # column-stochastic on non-dangling columns: P[v, w] = A[v, w] / deg(w)
    p0 = (g.adjacency @ sp.diags(inv)).tocsr()
    return p0, deg == 0


def personalized_pagerank_matrix(g: Graph, sources=None, alpha=0.85,
                                 tol=_PPR_TOL, max_iter=_PPR_MAX_ITER) -> np.ndarray:
    """Rows are PPR vectors ``pi_s`` solving ``pi = alpha P pi + (1 - alpha) e_s``.

    A dangling node sends its mass back to the source.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    src = _row_list(g, sources)
    n, m = g.num_nodes, src.size
    p0, dangling = _transition_parts(g)
    restart = np.zeros((n, m))
    restart[src, np.arange(m)] = 1.0
    pi = restart.copy()
    for _ in range(max_iter):
        nxt = p0 @ pi
        if dangling.any():
            nxt[src, np.arange(m)] += pi[dangling].sum(axis=0)
        nxt = alpha * nxt + (1.0 - alpha) * restart
        delta = np.abs(nxt - pi).sum(axis=0).max(initial=0.0)
        pi = nxt
        if delta < tol:
            break
    return pi.T.copy()


def personalized_pagerank(g: Graph, source: int, alpha=0.85) -> np.ndarray:
    return personalized_pagerank_matrix(g, [source], alpha)[0]


def khop_feature_distribution(g: Graph, features, k: int = 1) -> np.ndarray:
    """``A^k F`` by repeated sparse propagation, rows scaled to unit L1 norm."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    f = np.asarray(features, dtype=np.float64)
    if f.shape[0] != g.num_nodes:
        raise ParameterError(f"features have {f.shape[0]} rows, graph has {g.num_nodes} nodes")
    for _ in range(k):
        f = g.adjacency @ f
    norm = np.abs(f).sum(axis=1, keepdims=True)
    return np.divide(f, norm, out=np.zeros_like(f), where=norm > 0)


def degree_distribution_matrix(g: Graph, k: int = 1) -> np.ndarray:
    """Row ``u``: normalized histogram over degrees ``1..max_degree`` of the
    nodes exactly ``k`` hops from ``u``."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    deg = g.degrees
    delta = int(deg.max(initial=0))
    n = g.num_nodes
    if delta == 0:
        return np.zeros((n, 0))
    if k == 1:
        ring = g.adjacency
    else:
        dist, _ = all_pairs_shortest_path(g)
        ring = sp.csr_matrix(dist == k, dtype=np.float64)
    # one-hot degree of each node (isolated nodes contribute nothing: degree 0)
    onehot = sp.csr_matrix(
        (np.ones(int((deg > 0).sum())), (np.flatnonzero(deg > 0), deg[deg > 0] - 1)),
        shape=(n, delta))
    hist = np.asarray((ring @ onehot).todense())
    total = hist.sum(axis=1, keepdims=True)
    return np.divide(hist, total, out=np.zeros_like(hist), where=total > 0)


def degree_distribution_vector(g: Graph, node: int, k: int = 1) -> np.ndarray:
    return degree_distribution_matrix(g, k)[node]


# ---------------------------------------------------------------------------
# per-kind similarity


def _cosine_rows(m, rows):
    norm = np.linalg.norm(m, axis=1, keepdims=True)
    unit = np.divide(m, norm, out=np.zeros_like(m), where=norm > 0)
    s = unit[rows] @ unit.T
    return np.clip(s, 0.0, 1.0)


def _set_self(values, rows):
    values[np.arange(rows.size), rows] = 1.0
    return values


def compute_similarity(g: Graph, spec: RelationSpec, rows=None) -> SimilarityMatrix:
    """Similarity matrix for ``spec`` on ``g``; ``rows`` restricts to a row block."""
    spec = RelationSpec.parse(spec)
    spec.check_capability(g)
    r = _row_list(g, rows)
    kind = spec.kind
    if kind == "Link":
        vals = normalized_adjacency_with_self_loops(g)[r].tolil()
        vals[np.arange(r.size), r] = 1.0
        vals = vals.tocsr()
        vals.sort_indices()
    elif kind == "SPD":
        dist, diameter = all_pairs_shortest_path(g, None if rows is None else r)
        if diameter == 0:
            vals = np.zeros(dist.shape)
        else:
            vals = np.where(dist == UNREACHABLE, 0.0, (diameter - dist + 1.0) / diameter)
        vals = _set_self(vals, r)
    elif kind == "PageRank":
        vals = _set_self(personalized_pagerank_matrix(g, r, spec.alpha), r)
    elif kind == "DegreeDist":
        vals = _set_self(_cosine_rows(degree_distribution_matrix(g, spec.k), r), r)
    elif kind == "LabelDist":
        feats = khop_feature_distribution(g, g.one_hot_labels(), spec.k)
        vals = _set_self(_cosine_rows(feats, r), r)
    elif kind == "Attr":
        vals = _set_self(_cosine_rows(np.asarray(g.attributes), r), r)
    else:  # AttrDist
        feats = khop_feature_distribution(g, g.attributes, spec.k)
        vals = _set_self(_cosine_rows(feats, r), r)
    if not sp.issparse(vals):
        vals = np.clip(vals, 0.0, 1.0)
        vals.setflags(write=False)
    return SimilarityMatrix(spec, vals, spec.symmetric, None if rows is None else r)


# ---------------------------------------------------------------------------
# text cache

_HEADER = "relation,kind,k,alpha,n"


def save_similarity(s: SimilarityMatrix, path) -> None:
    """Write ``s`` as text: header, one metadata row, then ``u,v,value`` triples.

    The file is written to a temporary name and renamed into place so
    concurrent writers never expose a partial file.
    """
    path = Path(path)
    spec = s.relation
    lines = [_HEADER, f"{spec.name},{spec.kind},{spec.k},{spec.alpha!r},{s.n}",
             f"# storage={'sparse' if s.is_sparse else 'dense'}"]
    row_ids = np.arange(s.values.shape[0]) if s.rows is None else s.rows
    if s.rows is not None:
        lines.append("# rows=" + " ".join(str(int(u)) for u in row_ids))
    lines.append("u,v,value")
    if s.is_sparse:
        coo = s.values.tocoo()
        triples = zip(row_ids[coo.row].tolist(), coo.col.tolist(), coo.data.tolist())
    else:
        us, vs = np.indices(s.values.shape)
        triples = zip(row_ids[us.ravel()].tolist(), vs.ravel().tolist(),
                      np.asarray(s.values).ravel().tolist())
    body = "\n".join(f"{u},{v},{val!r}" for u, v, val in triples)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n" + body + ("\n" if body else ""))
    os.replace(tmp, path)


def load_similarity(path) -> SimilarityMatrix:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3 or lines[0].strip() != _HEADER:
        raise ParseError(f"missing header {_HEADER!r}", path, 1)
    try:
        _, kind, k, alpha, n = lines[1].split(",")
        spec = RelationSpec(kind, int(k), float(alpha))
        n = int(n)
    except ValueError as exc:
        raise ParseError(f"bad metadata row: {exc}", path, 2) from None
    storage, rows = "dense", None
    i = 2
    while i < len(lines) and lines[i].startswith("#"):
        key, _, val = lines[i][1:].strip().partition("=")
        if key == "storage":
            storage = val
        elif key == "rows":
            rows = np.array([int(t) for t in val.split()], dtype=np.int64)
        i += 1
    if i >= len(lines) or lines[i].strip() != "u,v,value":
        raise ParseError("missing 'u,v,value' header", path, i + 1)
    data = np.loadtxt(lines[i + 1:], delimiter=",", ndmin=2) if i + 1 < len(lines) else np.zeros((0, 3))
    nrows = n if rows is None else rows.size
    u = data[:, 0].astype(np.int64)
    if rows is not None:
        pos = {int(r): j for j, r in enumerate(rows)}
        u = np.array([pos[int(x)] for x in u], dtype=np.int64)
    v = data[:, 1].astype(np.int64)
    if storage == "sparse":
        vals = sp.csr_matrix((data[:, 2], (u, v)), shape=(nrows, n))
        vals.sort_indices()
    else:
        vals = np.zeros((nrows, n))
        vals[u, v] = data[:, 2]
        vals.setflags(write=False)
    return SimilarityMatrix(spec, vals, spec.symmetric, rows)
