"""Undirected graph store with optional node attributes and labels."""

from __future__ import annotations

import csv
import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import NodeReferenceError, ParseError, ValidationError

log = logging.getLogger(__name__)

_SPLIT = re.compile(r"[,\s]+")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph.

    Nodes are external string ids mapped to dense indices ``0..n-1`` in
    first-seen order. ``edges`` holds each undirected edge once as ``(u, v)``
    with ``u < v``.
    """

    node_ids: tuple[str, ...]
    edges: np.ndarray
    attributes: np.ndarray | None = None
    labels: np.ndarray | None = None
    label_names: tuple[str, ...] | None = None
    adjacency: sp.csr_matrix = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.node_ids)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(set(self.node_ids)) != n:
            raise ValidationError("duplicate node ids")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValidationError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                u = int(edges[edges[:, 0] == edges[:, 1]][0, 0])
                raise ValidationError(f"self-loop on node {self.node_ids[u]!r}")
        edges = np.sort(edges, axis=1)
        edges = np.unique(edges, axis=0) if edges.size else edges
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        adj.sort_indices()
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "_index", {nid: i for i, nid in enumerate(self.node_ids)})

        if self.attributes is not None:
            x = np.asarray(self.attributes, dtype=np.float64)
            if x.ndim != 2 or x.shape[0] != n:
                raise ValidationError(f"attribute matrix has {x.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(x)):
                raise ValidationError("attribute matrix contains non-finite values")
            x.setflags(write=False)
            object.__setattr__(self, "attributes", x)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64)
            if y.shape != (n,):
                raise ValidationError(f"label vector has shape {y.shape}, expected ({n},)")
            c = len(self.label_names) if self.label_names is not None else None
            if y.size and (y.min() < 0 or (c is not None and y.max() >= c)):
                raise ValidationError("label index outside [0, C)")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_classes(self) -> int:
        if self.labels is None:
            return 0
        if self.label_names is not None:
            return len(self.label_names)
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel().astype(np.int64)

    def index(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise NodeReferenceError(f"unknown node id {node_id!r}") from None

    def one_hot_labels(self) -> np.ndarray:
        y = np.zeros((self.num_nodes, self.num_classes))
        y[np.arange(self.num_nodes), self.labels] = 1.0
        return y

    def fingerprint(self) -> str:
        """Content hash over ids, edges, attributes and labels."""
        h = hashlib.sha256()
        h.update("\x1f".join(self.node_ids).encode())
        h.update(self.edges.tobytes())
        if self.attributes is not None:
            h.update(self.attributes.tobytes())
        if self.labels is not None:
            h.update(self.labels.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class NodeSet:
    indices: np.ndarray
    role: str = "query"

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size == 0:
            raise ValidationError(f"empty {self.role} node set")
        if np.any(np.diff(idx) <= 0):
            raise ValidationError(f"{self.role} node set must be sorted and distinct")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return int(self.indices.size)


def normalized_adjacency_with_self_loops(g: Graph) -> sp.csr_matrix:
    """Return ``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``."""
    a = g.adjacency + sp.identity(g.num_nodes, format="csr")
    dinv = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    d = sp.diags(dinv)
    out = (d @ a @ d).tocsr()
    out.sort_indices()
    return out


def _tokens(line):
    return [t for t in _SPLIT.split(line.strip()) if t]


def load_graph(edge_path, attr_path=None, label_path=None, directed_input=False) -> Graph:
    """Read an edge list plus optional attribute and label tables.

    A line with a single token declares an isolated node. With
    ``directed_input`` the arcs are symmetrized; either way repeated edges
    collapse to one.
    """
    edge_path = Path(edge_path)
    ids: dict[str, int] = {}
    pairs = []
    with open(edge_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip() or raw.lstrip().startswith("#"):
                continue
            toks = _tokens(raw)
            if len(toks) not in (1, 2):
                raise ParseError(f"expected 1 or 2 tokens, got {len(toks)}", edge_path, lineno)
            for t in toks:
                ids.setdefault(t, len(ids))
            if len(toks) == 2:
                u, v = ids[toks[0]], ids[toks[1]]
                if u == v:
                    raise ValidationError(f"{edge_path}:{lineno}: self-loop on node {toks[0]!r}")
                pairs.append((u, v))
    if not ids:
        raise ParseError("edge file declares no nodes", edge_path)
    node_ids = tuple(ids)
    raw_count = len(pairs)
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)

    attributes = None
    if attr_path is not None:
        attributes = _read_attributes(Path(attr_path), ids)
    labels = label_names = None
    if label_path is not None:
        labels, label_names = _read_labels(Path(label_path), ids)

    g = Graph(node_ids, edges, attributes, labels, label_names)
    if g.num_edges != raw_count:
        log.info("%s: collapsed %d duplicate edge lines (directed_input=%s)",
                 edge_path, raw_count - g.num_edges, directed_input)
    return g


def _read_table(path, expect_first):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ParseError("empty table", path)
    header = [h.strip() for h in rows[0]]
    if header[0] != expect_first:
        raise ParseError(f"header must start with {expect_first!r}", path, 1)
    return header, rows[1:]


def _read_attributes(path, ids):
    header, rows = _read_table(path, "node")
    width = len(header) - 1
    if width < 1:
        raise ParseError("attribute table has no feature columns", path, 1)
    x = np.full((len(ids), width), np.nan)
    seen = set()
    for lineno, row in enumerate(rows, 2):
        if len(row) != width + 1:
            raise ParseError(f"expected {width + 1} fields, got {len(row)}", path, lineno)
        nid = row[0].strip()
        if nid not in ids:
            raise NodeReferenceError(f"{path}:{lineno}: unknown node id {nid!r}")
        if nid in seen:
            raise ParseError(f"duplicate row for node {nid!r}", path, lineno)
        seen.add(nid)
        try:
            x[ids[nid]] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
    missing = [nid for nid in ids if nid not in seen]
    if missing:
        raise NodeReferenceError(f"{path}: no attributes for node {missing[0]!r}")
    return x


def _read_labels(path, ids):
    header, rows = _read_table(path, "node")
    if len(header) != 2:
        raise ParseError("label table header must be 'node,label'", path, 1)
    classes: dict[str, int] = {}
    y = np.full(len(ids), -1, dtype=np.int64)
    for lineno, row in enumerate(rows, 2):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", path, lineno)
        nid, lab = row[0].strip(), row[1].strip()
        if nid not in ids:
            raise NodeReferenceError(f"{path}:{lineno}: unknown node id {nid!r}")
        if y[ids[nid]] >= 0:
            raise ParseError(f"duplicate row for node {nid!r}", path, lineno)
        y[ids[nid]] = classes.setdefault(lab, len(classes))
    if np.any(y < 0):
        nid = next(n for n, i in ids.items() if y[i] < 0)
        raise NodeReferenceError(f"{path}: no label for node {nid!r}")
    return y, tuple(classes)


def save_graph(g: Graph, edge_path, attr_path=None, label_path=None) -> None:
    """Write ``g`` in the formats read by :func:`load_graph`."""
    with open(edge_path, "w", encoding="utf-8") as fh:
        # declare every node up front so first-seen order survives a reload
        for nid in g.node_ids:
            fh.write(f"{nid}\n")
        for u, v in g.edges:
            fh.write(f"{g.node_ids[u]} {g.node_ids[v]}\n")
    if attr_path is not None and g.attributes is not None:
        with open(attr_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node"] + [f"f{j + 1}" for j in range(g.attributes.shape[1])])
            for nid, row in zip(g.node_ids, g.attributes):
                w.writerow([nid] + [repr(float(v)) for v in row])
    if label_path is not None and g.labels is not None:
        names = g.label_names or tuple(str(c) for c in range(g.num_classes))
        with open(label_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "label"])
            for nid, lab in zip(g.node_ids, g.labels):
                w.writerow([nid, names[lab]])
