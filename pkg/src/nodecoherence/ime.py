"""Interpretation-method evaluation.

For every target relation an embedding is synthesized from the eigendecomposition
of that relation's similarity matrix; the method under test scores the embedding
against every relation, and the target's rank among those scores feeds a mean
reciprocal rank.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import KendallTauScorer, PropertyClassScorer
from .embeddings import EigenBasis, evd_basis, normalize_rows
from .errors import CoherenceError, ParameterError, UndefinedCorrelationError
from .graph import Graph
from .nci import CoherenceParams, NCIScorer
from .relations import RelationSpec, SimilarityMatrix, compute_similarity, computable_relations

METHODS = ("NCI", "KendallTau", "PropertyClass")


def make_scorer(method: str, params: CoherenceParams, kendall_pair_sample: int = 100_000):
    if method == "NCI":
        return NCIScorer(params)
    if method == "KendallTau":
        return KendallTauScorer(kendall_pair_sample, params.seed)
    if method == "PropertyClass":
        return PropertyClassScorer(params)
    raise ParameterError(f"unknown interpretation method {method!r}; expected one of {METHODS}")


def reciprocal_rank_stats(scores: dict, target: str):
    """Rank counts strictly greater scores only; ties favour the target."""
    mine = scores[target]
    others = [v for k, v in scores.items() if k != target]
    rank = 1 + sum(v > mine for v in others)
    ties = sum(v == mine for v in others)
    return rank, ties


@dataclass
class TargetResult:
    target: str
    scores: dict
    rank: int
    reciprocal_rank: float
    ties: int
    clamped_fraction: float


@dataclass
class ImeResult:
    method: str
    d: int
    n: int
    per_target: list[TargetResult]
    params: dict = field(default_factory=dict)

    @property
    def expressiveness(self) -> float:
        return self.d / self.n

    @property
    def mrr(self) -> float:
        return float(np.mean([t.reciprocal_rank for t in self.per_target]))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "d": self.d,
            "n": self.n,
            "expressiveness": self.expressiveness,
            "per_target": [asdict(t) for t in self.per_target],
            "mrr": self.mrr,
            "ties": sum(t.ties for t in self.per_target),
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def flat_rows(self) -> list[dict]:
        rows = []
        for t in self.per_target:
            for rel, val in t.scores.items():
                rows.append({"method": self.method, "d": self.d,
                             "expressiveness": self.expressiveness, "target": t.target,
                             "relation": rel, "score": val, "rank": t.rank})
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["method", "d", "expressiveness", "target",
                                            "relation", "score", "rank"], lineterminator="\n")
        w.writeheader()
        w.writerows(self.flat_rows())
        return buf.getvalue()


class ImeCache:
    """Similarity matrices and eigendecompositions, computed once per relation."""

    def __init__(self, g: Graph, relations):
        self.g = g
        self.relations = [RelationSpec.parse(r) for r in relations]
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise ParameterError(f"duplicate relations in {names}")
        self._sims: dict[str, SimilarityMatrix] = {}
        self._bases: dict[str, EigenBasis] = {}

    @property
    def names(self):
        return [r.name for r in self.relations]

    def similarity(self, rel: RelationSpec) -> SimilarityMatrix:
        s = self._sims.get(rel.name)
        if s is None:
            s = self._sims[rel.name] = compute_similarity(self.g, rel).as_symmetric()
        return s

    def put_similarity(self, s: SimilarityMatrix):
        self._sims[s.relation.name] = s.as_symmetric()

    def basis(self, rel: RelationSpec) -> EigenBasis:
        b = self._bases.get(rel.name)
        if b is None:
            b = self._bases[rel.name] = evd_basis(self.similarity(rel))
        return b


def _annotate(exc, target, rel):
    msg = f"IME cell (target={target}, relation={rel}): {exc}"
    try:
        new = type(exc)(msg)
    except TypeError:
        new = CoherenceError(msg)
    return new


def _score_target(cache: ImeCache, target: RelationSpec, d: int, scorer) -> TargetResult:
    basis = cache.basis(target)
    zn = normalize_rows(basis.embedding(d, cache.g.node_ids))
    sigma = scorer.sigma(zn) if hasattr(scorer, "sigma") else None
    scores = {}
    for rel in cache.relations:
        try:
            scores[rel.name] = float(scorer.score(zn, cache.similarity(rel), sigma))
        except CoherenceError as exc:
            raise _annotate(exc, target.name, rel.name) from exc
    rank, ties = reciprocal_rank_stats(scores, target.name)
    return TargetResult(target.name, scores, rank, 1.0 / rank, ties, basis.clamped_fraction)


def run_ime(g: Graph, relations=None, d: int | None = None, method="NCI",
            params: CoherenceParams | None = None, cache: ImeCache | None = None,
            kendall_pair_sample: int = 100_000, executor=None) -> ImeResult:
    """Evaluate one interpretation method at embedding dimension ``d``.

    ``relations`` defaults to every relation computable on ``g``; ``d``
    defaults to the node count. ``executor`` runs target relations in
    parallel with identical results.
    """
    params = params or CoherenceParams()
    if cache is None:
        cache = ImeCache(g, relations if relations is not None else computable_relations(g))
    if len(cache.relations) < 2:
        raise ParameterError("IME needs at least two relations")
    n = g.num_nodes
    d = n if d is None else int(d)
    if not 1 <= d <= n:
        raise ParameterError(f"dimension d={d} outside [1, {n}]")
    scorer = make_scorer(method, params, kendall_pair_sample) if isinstance(method, str) else method
    # warm caches serially so workers only read
    for rel in cache.relations:
        cache.basis(rel)
    if executor is None:
        per_target = [_score_target(cache, rel, d, scorer) for rel in cache.relations]
    else:
        futs = [executor.submit(_score_target, cache, rel, d, scorer) for rel in cache.relations]
        per_target = [f.result() for f in futs]
    snapshot = asdict(params)
    snapshot["kendall_pair_sample"] = kendall_pair_sample
    return ImeResult(scorer.name, d, n, per_target, snapshot)


def expressiveness_sweep(g: Graph, relations=None, dims=None, methods=("NCI",),
                         params: CoherenceParams | None = None, cache: ImeCache | None = None,
                         kendall_pair_sample: int = 100_000, executor=None) -> list[ImeResult]:
    """``run_ime`` for every (dimension, method), reusing one decomposition per relation."""
    params = params or CoherenceParams()
    if cache is None:
        cache = ImeCache(g, relations if relations is not None else computable_relations(g))
    dims = [g.num_nodes] if dims is None else [int(x) for x in dims]
    if dims != sorted(dims):
        raise ParameterError("dims must be sorted ascending")
    out = []
    for d in dims:
        for m in methods:
            scorer = make_scorer(m, params, kendall_pair_sample) if isinstance(m, str) else m
            out.append(run_ime(g, d=d, method=scorer, params=params, cache=cache,
                               kendall_pair_sample=kendall_pair_sample, executor=executor))
    return out


def pearson_correlation(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("pearson_correlation needs two equal-length vectors")
    if x.size < 2:
        raise UndefinedCorrelationError("need at least two observations")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.dot(dx, dx)), np.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("zero variance in one of the vectors")
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))
