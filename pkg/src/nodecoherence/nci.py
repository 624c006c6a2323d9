"""Coherence-rate interpretation of node embeddings.

For each relation the score combines two rates measured on row-normalized
embeddings:

* clustering rate: over sampled (similar, intruder) pairs per query node,
  the fraction where the intruder is farther than the similar node by at
  least ``c`` standard deviations of the pairwise-distance distribution.
  Under the null it cannot exceed ``2 / (2 + c**2)`` (Cantelli).
* smoothness rate: the fraction of query nodes whose banded similar nodes,
  ordered by decreasing similarity, appear at strictly increasing distance.
  Its null bound is the 95th percentile over row-shuffled embeddings.

All sampling depends only on the similarity matrix and the seed: each query
node draws from its own ``SeedSequence([seed, stream, node])`` substream, so
results do not depend on evaluation order or threading.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .embeddings import EmbeddingMatrix, distance_std, normalize_rows, shuffle_embedding
from .errors import ConstraintError, DegenerateRelationError, ParameterError, RelationKeyError
from .relations import SimilarityMatrix

_STREAM_QUERIES = 11
_STREAM_CLUSTER = 12
_STREAM_BANDS = 13
_STREAM_TIES = 14
TIE_TOL = 1e-12


@dataclass(frozen=True)
class CoherenceParams:
    c: float = 1.64
    eta_s_percentile: float = 70.0
    eta_i_percentile: float = 5.0
    K: int = 3
    k_bands: int = 3
    query_fraction: float = 1.0
    n_null_shuffles: int = 100
    seed: int = 0
    # "row_max": top band closes at the query's largest similarity; "one": at 1.0
    band_top: str = "row_max"
    distance_sample: int = 100_000

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"c must be > 0, got {self.c}")
        if not 0 <= self.eta_i_percentile < self.eta_s_percentile <= 100:
            raise ParameterError("need 0 <= eta_i_percentile < eta_s_percentile <= 100")
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if self.k_bands < 2:
            raise ParameterError(f"k_bands must be >= 2, got {self.k_bands}")
        if not 0 < self.query_fraction <= 1:
            raise ParameterError(f"query_fraction must lie in (0, 1], got {self.query_fraction}")
        if self.n_null_shuffles < 1:
            raise ParameterError(f"n_null_shuffles must be >= 1, got {self.n_null_shuffles}")
        if self.band_top not in ("row_max", "one"):
            raise ParameterError(f"band_top must be 'row_max' or 'one', got {self.band_top!r}")

    @classmethod
    def from_dict(cls, d) -> "CoherenceParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown coherence parameter(s): {sorted(unknown)}")
        return cls(**d)


def _rng(seed, stream, u):
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream, int(u)]))


def query_nodes(s: SimilarityMatrix, p: CoherenceParams) -> np.ndarray:
    base = np.arange(s.n) if s.rows is None else np.sort(s.rows)
    if p.query_fraction >= 1.0:
        return base
    m = max(1, int(round(p.query_fraction * base.size)))
    rng = np.random.default_rng(np.random.SeedSequence([p.seed, _STREAM_QUERIES]))
    return np.sort(rng.choice(base, size=m, replace=False))


def _row_without_self(s, u):
    row = s.row(u)
    targets = np.flatnonzero(np.arange(row.size) != u)
    return targets, row[targets]


def similar_and_intruders(s: SimilarityMatrix, u: int, p: CoherenceParams, rng=None):
    """Similar nodes (top ``100 - eta_s_percentile`` percent of u's row) and
    intruders (bottom ``eta_i_percentile`` percent), u itself excluded.

    Without ties these are exactly ``{v : s(u,v) >= eta_s}`` and
    ``{v : s(u,v) < eta_i}`` for the linearly interpolated percentiles. Ties
    straddling a cut are broken uniformly at random, so heavily tied rows
    (e.g. the zeros of a sparse relation) keep the intended set sizes.
    """
    targets, vals = _row_without_self(s, u)
    m = targets.size
    if m == 0:
        return targets, targets, (math.nan, math.nan)
    if rng is None:
        rng = _rng(p.seed, _STREAM_TIES, u)
    eta_s, eta_i = np.percentile(vals, [p.eta_s_percentile, p.eta_i_percentile])
    n_sim = m - math.ceil(p.eta_s_percentile / 100.0 * (m - 1) - 1e-9)
    n_intr = math.ceil(p.eta_i_percentile / 100.0 * (m - 1) - 1e-9)
    # ascending by value, ties in random order
    order = np.lexsort((rng.random(m), vals))
    intr = np.sort(targets[order[:n_intr]])
    sim = np.sort(targets[order[m - n_sim:]]) if n_sim > 0 else targets[:0]
    return sim, intr, (float(eta_s), float(eta_i))


def band_thresholds(eta_s: float, k: int, top: float = 1.0) -> list[float]:
    """``eta_i = (k - i) / k * (top - eta_s) + eta_s`` for ``i = 1..k``."""
    return [(k - i) / k * (top - eta_s) + eta_s for i in range(1, k + 1)]


def build_similar_bands(s: SimilarityMatrix, u: int, p: CoherenceParams, rng=None) -> list[int]:
    """One uniformly drawn node per similarity band, highest band first.

    Band ``i`` holds ``eta_i <= s < eta_{i-1}``; the top band is closed at
    ``eta_0`` so nodes at the maximum similarity are eligible. Returns an
    empty list when any band is empty.
    """
    if rng is None:
        rng = _rng(p.seed, _STREAM_BANDS, u)
    targets, vals = _row_without_self(s, u)
    if targets.size == 0:
        return []
    eta_s = float(np.percentile(vals, p.eta_s_percentile))
    top = float(vals.max()) if p.band_top == "row_max" else 1.0
    if top <= eta_s:
        return []
    cuts = band_thresholds(eta_s, p.k_bands, top)
    picked = []
    upper = None
    for lo in cuts:
        mask = vals >= lo
        if upper is not None:
            mask &= vals < upper
        members = targets[mask]
        if members.size == 0:
            return []
        picked.append(int(members[rng.integers(members.size)]))
        upper = lo
    return picked


# ---------------------------------------------------------------------------
# sampling plans (embedding-independent)


@dataclass(frozen=True, eq=False)
class ClusterPlan:
    query: np.ndarray      # per sampled pair: query node
    similar: np.ndarray    # per sampled pair: similar node
    intruder: np.ndarray   # per sampled pair: intruder node
    n_queries: int
    usable: int
    skipped: dict


@dataclass(frozen=True, eq=False)
class SmoothPlan:
    query: np.ndarray      # (q,)
    members: np.ndarray    # (q, k), decreasing similarity
    n_queries: int
    skipped: dict


def cluster_plan(s: SimilarityMatrix, p: CoherenceParams, queries=None) -> ClusterPlan:
    queries = query_nodes(s, p) if queries is None else np.asarray(queries)
    qs, vss, vis = [], [], []
    skipped = {"no_similar": 0, "no_intruder": 0}
    usable = 0
    for u in queries:
        sim, intr, _ = similar_and_intruders(s, int(u), p)
        if sim.size == 0:
            skipped["no_similar"] += 1
            continue
        if intr.size == 0:
            skipped["no_intruder"] += 1
            continue
        usable += 1
        total = sim.size * intr.size
        if total <= p.K:
            flat = np.arange(total)
        else:
            flat = _rng(p.seed, _STREAM_CLUSTER, u).choice(total, size=p.K, replace=False)
        qs.append(np.full(flat.size, u))
        vss.append(sim[flat // intr.size])
        vis.append(intr[flat % intr.size])
    cat = (lambda xs: np.concatenate(xs).astype(np.int64)) if qs else (lambda xs: np.empty(0, np.int64))
    return ClusterPlan(cat(qs), cat(vss), cat(vis), int(len(queries)), usable, skipped)


def smooth_plan(s: SimilarityMatrix, p: CoherenceParams, queries=None) -> SmoothPlan:
    queries = query_nodes(s, p) if queries is None else np.asarray(queries)
    qs, members = [], []
    skipped = {"empty_band": 0}
    for u in queries:
        bands = build_similar_bands(s, int(u), p)
        if not bands:
            skipped["empty_band"] += 1
            continue
        qs.append(int(u))
        members.append(bands)
    m = np.array(members, dtype=np.int64).reshape(len(qs), p.k_bands)
    return SmoothPlan(np.array(qs, dtype=np.int64), m, int(len(queries)), skipped)


def _clustering_from_plan(z: np.ndarray, plan: ClusterPlan, margin: float) -> float:
    d_s = np.linalg.norm(z[plan.query] - z[plan.similar], axis=1)
    d_i = np.linalg.norm(z[plan.query] - z[plan.intruder], axis=1)
    gap = d_i - d_s
    # a zero-spread embedding separates nothing, so a zero margin must be beaten strictly
    hits = gap > 0 if margin == 0 else gap >= margin
    return float(np.count_nonzero(hits) / plan.query.size)


def _smoothness_from_plan(z: np.ndarray, plan: SmoothPlan) -> float:
    d = np.linalg.norm(z[plan.members] - z[plan.query][:, None, :], axis=2)
    ok = np.all(np.diff(d, axis=1) > TIE_TOL, axis=1)
    return float(np.count_nonzero(ok) / plan.query.size)


def _prepare(z) -> np.ndarray:
    return normalize_rows(z).values


def _check_cluster(plan, s):
    if plan.usable == 0:
        raise DegenerateRelationError(
            f"relation {s.relation.name}: every query node skipped for clustering ({plan.skipped})")


def _check_smooth(plan, s):
    if plan.query.size == 0:
        raise DegenerateRelationError(
            f"relation {s.relation.name}: every query node skipped for smoothness ({plan.skipped})")


# ---------------------------------------------------------------------------
# public rates and bounds


def clustering_null_bound(c: float) -> float:
    if c < 0:
        raise ParameterError(f"c must be >= 0, got {c}")
    return 2.0 / (2.0 + c * c)


def clustering_coherence_rate(z, s: SimilarityMatrix, p: CoherenceParams, sigma=None) -> float:
    zn = normalize_rows(z)
    plan = cluster_plan(s, p)
    _check_cluster(plan, s)
    if sigma is None:
        sigma = distance_std(zn, p.distance_sample, p.seed)
    return _clustering_from_plan(zn.values, plan, p.c * sigma)


def smoothness_coherence_rate(z, s: SimilarityMatrix, p: CoherenceParams) -> float:
    plan = smooth_plan(s, p)
    _check_smooth(plan, s)
    return _smoothness_from_plan(_prepare(z), plan)


def _percentile95(rates) -> float:
    return float(np.percentile(np.asarray(rates), 95))


def smoothness_null_rates(z, s: SimilarityMatrix, p: CoherenceParams, plan=None) -> np.ndarray:
    """Smoothness rates of ``n_null_shuffles`` row-shuffled copies (seeds seed+1..seed+n)."""
    if plan is None:
        plan = smooth_plan(s, p)
        _check_smooth(plan, s)
    zn = normalize_rows(z)
    return np.array([
        _smoothness_from_plan(shuffle_embedding(zn, p.seed + i).values, plan)
        for i in range(1, p.n_null_shuffles + 1)
    ])


def smoothness_null_bound(z, s: SimilarityMatrix, p: CoherenceParams) -> float:
    return _percentile95(smoothness_null_rates(z, s, p))


def coherence_rate(clu: float, smo: float) -> float:
    return 0.5 * (clu + smo)


def model_coherence_score(rates: dict, weights: dict | None = None) -> float:
    """Weighted sum of per-relation coherence rates; weights must sum to 1."""
    if not rates:
        raise ParameterError("no relation rates given")
    if weights is None:
        weights = {r: 1.0 / len(rates) for r in rates}
    if set(weights) != set(rates):
        raise RelationKeyError(
            f"weight relations {sorted(weights)} do not match rate relations {sorted(rates)}")
    if any(w < 0 for w in weights.values()):
        raise ConstraintError("weights must be nonnegative")
    total = sum(weights.values())
    if abs(total - 1.0) > 1e-9:
        raise ConstraintError(f"weights sum to {total}, expected 1")
    return float(sum(weights[r] * rates[r] for r in sorted(rates)))


# ---------------------------------------------------------------------------
# scorer with plan cache, and full reports


class NCIScorer:
    """Coherence-rate scorer that reuses sampling plans across embeddings."""

    name = "NCI"

    def __init__(self, params: CoherenceParams | None = None):
        self.params = params or CoherenceParams()
        self._plans = {}

    def plans(self, s: SimilarityMatrix):
        key = (s.relation, s.content_hash())
        got = self._plans.get(key)
        if got is None:
            cp = cluster_plan(s, self.params)
            sp_ = smooth_plan(s, self.params)
            _check_cluster(cp, s)
            _check_smooth(sp_, s)
            got = self._plans[key] = (cp, sp_)
        return got

    def sigma(self, zn: EmbeddingMatrix) -> float:
        return distance_std(zn, self.params.distance_sample, self.params.seed)

    def rates(self, z, s: SimilarityMatrix, sigma=None):
        zn = normalize_rows(z)
        cp, sp_ = self.plans(s)
        if sigma is None:
            sigma = self.sigma(zn)
        clu = _clustering_from_plan(zn.values, cp, self.params.c * sigma)
        smo = _smoothness_from_plan(zn.values, sp_)
        return clu, smo

    def score(self, z, s: SimilarityMatrix, sigma=None) -> float:
        return coherence_rate(*self.rates(z, s, sigma))

    def relation_result(self, z, s: SimilarityMatrix, sigma=None) -> "RelationResult":
        p = self.params
        zn = normalize_rows(z)
        if sigma is None:
            sigma = self.sigma(zn)
        cp, sp_ = self.plans(s)
        clu = _clustering_from_plan(zn.values, cp, p.c * sigma)
        smo = _smoothness_from_plan(zn.values, sp_)
        clu_bound = clustering_null_bound(p.c)
        smo_bound = _percentile95(smoothness_null_rates(zn, s, p, sp_))
        return RelationResult(
            name=s.relation.name,
            clustering_rate=clu,
            clustering_bound=clu_bound,
            smoothness_rate=smo,
            smoothness_bound=smo_bound,
            coherence_rate=coherence_rate(clu, smo),
            significant=bool(clu > clu_bound and smo > smo_bound),
            usable_query_fraction=min(cp.usable, sp_.query.size) / max(cp.n_queries, 1),
            clustering_usable=cp.usable,
            smoothness_usable=int(sp_.query.size),
            n_queries=cp.n_queries,
            skipped={"clustering": dict(cp.skipped), "smoothness": dict(sp_.skipped)},
            similarity_hash=s.content_hash(),
        )


@dataclass
class RelationResult:
    name: str
    clustering_rate: float
    clustering_bound: float
    smoothness_rate: float
    smoothness_bound: float
    coherence_rate: float
    significant: bool
    usable_query_fraction: float
    clustering_usable: int = 0
    smoothness_usable: int = 0
    n_queries: int = 0
    skipped: dict = field(default_factory=dict)
    similarity_hash: str = ""

    @property
    def most_expressive(self) -> bool:
        return self.coherence_rate == 1.0


@dataclass
class CoherenceReport:
    model: str
    params: dict
    relations: list[RelationResult]
    model_coherence_score: float
    weights: dict
    node_ids: list | None = None
    sigma: float = 0.0
    source: str = ""

    def rates(self) -> dict:
        return {r.name: r.coherence_rate for r in self.relations}

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "method": "NCI",
            "source": self.source,
            "params": self.params,
            "distance_std": self.sigma,
            "relations": [
                {**asdict(r), "most_expressive": r.most_expressive} for r in self.relations
            ],
            "weights": self.weights,
            "model_coherence_score": self.model_coherence_score,
            "node_ids": self.node_ids,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d) -> "CoherenceReport":
        rels = []
        for r in d["relations"]:
            r = dict(r)
            r.pop("most_expressive", None)
            rels.append(RelationResult(**r))
        return cls(d["model"], d["params"], rels, d["model_coherence_score"], d["weights"],
                   d.get("node_ids"), d.get("distance_std", 0.0), d.get("source", ""))


def interpret_embedding(z, sims, p: CoherenceParams | None = None, model: str = "model",
                        weights: dict | None = None, scorer: NCIScorer | None = None,
                        executor=None) -> CoherenceReport:
    """Score every similarity matrix in ``sims`` against embedding ``z``.

    ``executor`` (a ``concurrent.futures`` executor) spreads relations over
    workers; the report is identical either way.
    """
    scorer = scorer or NCIScorer(p)
    p = scorer.params
    zn = normalize_rows(z)
    sigma = scorer.sigma(zn)
    if executor is None:
        results = [scorer.relation_result(zn, s, sigma) for s in sims]
    else:
        futures = [executor.submit(scorer.relation_result, zn, s, sigma) for s in sims]
        results = [f.result() for f in futures]
    rates = {r.name: r.coherence_rate for r in results}
    if weights is None:
        weights = {r: 1.0 / len(rates) for r in rates}
    omega = model_coherence_score(rates, weights)
    return CoherenceReport(model, asdict(p), results, omega, dict(weights),
                           list(zn.node_ids) if zn.node_ids else None, sigma,
                           getattr(z, "source", ""))
