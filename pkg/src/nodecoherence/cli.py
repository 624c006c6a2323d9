"""Command-line entry point: ``nodecoherence <command> --config run.json``.

Every run is described by one JSON config; command-line flags override its
keys. Outputs are deterministic JSON and comma-separated tables in the output
directory, with wall-clock information kept in a separate ``*.meta.json``.

Exit codes: 0 success, 1 internal or numerical error, 2 user or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import KendallTauScorer, PropertyClassScorer
from .embeddings import (
    EmbeddingMatrix,
    demo_rp_embedding,
    generate_evd_embedding,
    load_embedding,
    save_embedding,
    shuffle_embedding,
)
from .errors import (
    CoherenceError,
    NodeReferenceError,
    NumericalError,
    ParseError,
    UndefinedCorrelationError,
    UserError,
    ValidationError,
)
from .graph import Graph, load_graph, save_graph
from .ime import METHODS, ImeCache, expressiveness_sweep, pearson_correlation
from .kernels import BACKEND
from .nci import CoherenceParams, NCIScorer, interpret_embedding, model_coherence_score
from .relations import (
    RelationSpec,
    SimilarityMatrix,
    compute_similarity,
    computable_relations,
    load_similarity,
    save_similarity,
)

EXIT_OK, EXIT_INTERNAL, EXIT_USER = 0, 1, 2

_CONFIG_KEYS = {"seed", "graph", "embeddings", "relations", "params", "methods", "dims",
                "weights", "out_dir", "cache_dir", "workers", "kendall_pair_sample"}


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    seed: int
    graph: dict
    base_dir: Path
    embeddings: dict = field(default_factory=dict)
    relations: list | None = None
    params: dict = field(default_factory=dict)
    methods: list = field(default_factory=lambda: ["NCI"])
    dims: list | None = None
    weights: dict | None = None
    out_dir: str = "out"
    cache_dir: str | None = None
    workers: int = 1
    kendall_pair_sample: int = 100_000

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out_path(self) -> Path:
        return self.path(self.out_dir)

    @property
    def cache_path(self) -> Path | None:
        return None if self.cache_dir is None else self.path(self.cache_dir)

    def coherence_params(self) -> CoherenceParams:
        return CoherenceParams.from_dict({**self.params, "seed": self.seed})

    def relation_specs(self, g: Graph) -> list[RelationSpec]:
        if self.relations is None:
            return computable_relations(g)
        specs = [RelationSpec.parse(r) for r in self.relations]
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate relations in config: {names}")
        return specs


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config key(s): {sorted(unknown)}")
    if "seed" not in raw:
        raise ValidationError("config must set 'seed'")
    if not isinstance(raw.get("graph"), dict) or "edges" not in raw["graph"]:
        raise ValidationError("config needs a 'graph' object with an 'edges' path")
    if isinstance(raw.get("params"), dict) and "seed" in raw["params"]:
        raise ValidationError("set the seed at top level, not inside 'params'")
    cfg = RunConfig(base_dir=path.parent.resolve(), **raw)
    cfg.seed = int(cfg.seed)
    if cfg.workers < 1:
        raise ValidationError(f"workers must be >= 1, got {cfg.workers}")
    bad = [m for m in cfg.methods if m not in METHODS]
    if bad:
        raise ValidationError(f"unknown method(s) {bad}; expected a subset of {list(METHODS)}")
    _validate_paths(cfg)
    cfg.coherence_params()  # fail early on bad parameters
    return cfg


def _validate_paths(cfg: RunConfig) -> None:
    for key in ("edges", "attributes", "labels"):
        p = cfg.graph.get(key)
        if p is not None and not cfg.path(p).is_file():
            raise ValidationError(f"graph {key} file not found: {cfg.path(p)}")
    for name, entry in cfg.embeddings.items():
        if isinstance(entry, str) and not cfg.path(entry).is_file():
            raise ValidationError(f"embedding {name!r}: file not found: {cfg.path(entry)}")


def _graph(cfg: RunConfig) -> Graph:
    gc = cfg.graph
    return load_graph(cfg.path(gc["edges"]),
                      cfg.path(gc["attributes"]) if gc.get("attributes") else None,
                      cfg.path(gc["labels"]) if gc.get("labels") else None,
                      directed_input=bool(gc.get("directed_input", False)))


# ---------------------------------------------------------------------------
# output helpers


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write_meta(cfg: RunConfig, command: str, started: float, outputs) -> None:
    _write_json(cfg.out_path / f"{command}.meta.json", {
        "command": command,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "elapsed_seconds": round(time.time() - started, 3),
        "version": __version__,
        "kernel_backend": BACKEND,
        "python": platform.python_version(),
        "outputs": sorted(str(p) for p in outputs),
    })


def _executor(cfg: RunConfig):
    return ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else nullcontext(None)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


# ---------------------------------------------------------------------------
# relations


def _cache_file(cfg: RunConfig, g: Graph, spec: RelationSpec) -> Path | None:
    if cfg.cache_path is None:
        return None
    return cfg.cache_path / f"{g.fingerprint()[:16]}__{spec.name}.csv"


def similarities(cfg: RunConfig, g: Graph, specs=None) -> tuple[list[SimilarityMatrix], dict]:
    """Similarity matrices for the configured relations, through the cache when set.

    Returns the matrices and ``{name: True if read from cache}``.
    """
    specs = cfg.relation_specs(g) if specs is None else specs
    out, hits = [], {}
    for spec in specs:
        spec.check_capability(g)
        path = _cache_file(cfg, g, spec)
        if path is not None and path.is_file():
            s = load_similarity(path)
            if s.relation != spec or s.n != g.num_nodes:
                raise ValidationError(f"cache file {path} does not match relation {spec.name}")
            hits[spec.name] = True
        else:
            s = compute_similarity(g, spec)
            if path is not None:
                save_similarity(s, path)
            hits[spec.name] = False
        out.append(s)
    return out, hits


def _summary_row(s: SimilarityMatrix) -> dict:
    if s.is_sparse:
        off = s.values.copy().tolil()
        off.setdiag(0)
        off = off.tocsr()
        off.eliminate_zeros()
        nnz = off.nnz
        vals = off.data
    else:
        d = np.asarray(s.values).copy()
        np.fill_diagonal(d, 0.0)
        vals = d[d != 0]
        nnz = vals.size
    n = s.n
    total = n * (n - 1)
    row = {
        "relation": s.relation.name,
        "min_offdiag": float(vals.min()) if vals.size and nnz == total else 0.0,
        "max_offdiag": float(vals.max()) if vals.size else 0.0,
        "nonzero_fraction": nnz / total if total else 0.0,
        "content_hash": s.content_hash(),
    }
    note = _NOTES.get(s.relation.kind)
    if note:
        row["note"] = note
    return row


_NOTES = {
    "DegreeDist": "degree histogram of exactly-k-hop neighbours",
    "LabelDist": "A^k Y rows L1-normalized",
    "AttrDist": "A^k X rows L1-normalized",
    "PageRank": "directed personalized PageRank rows",
}


def cmd_relations(cfg: RunConfig) -> dict:
    g = _graph(cfg)
    sims, hits = similarities(cfg, g)
    rows = []
    for s in sims:
        row = _summary_row(s)
        row["cache_hit"] = hits[s.relation.name]
        rows.append(row)
    summary = {"graph": {"nodes": g.num_nodes, "edges": g.num_edges,
                         "fingerprint": g.fingerprint()},
               "relations": rows}
    return summary


# ---------------------------------------------------------------------------
# embeddings


def _embedding(cfg: RunConfig, g: Graph, name: str, entry, built: dict, sims) -> EmbeddingMatrix:
    if isinstance(entry, str):
        return load_embedding(cfg.path(entry), g)
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ValidationError(f"embedding {name!r}: expected a path or an object with 'kind'")
    kind = entry["kind"]
    if kind == "file":
        return load_embedding(cfg.path(entry["path"]), g)
    if kind == "demo-rp":
        return demo_rp_embedding(g, int(entry["d"]), int(entry.get("seed", cfg.seed)))
    if kind == "evd":
        spec = RelationSpec.parse(entry["relation"])
        s = next((x for x in sims if x.relation == spec), None)
        if s is None:
            s = compute_similarity(g, spec)
        return generate_evd_embedding(s.as_symmetric(), int(entry.get("d", g.num_nodes)),
                                      g.node_ids)
    if kind == "shuffle":
        of = entry.get("of")
        if of not in built:
            raise ValidationError(f"embedding {name!r}: shuffle source {of!r} must be listed earlier")
        return shuffle_embedding(built[of], int(entry.get("seed", cfg.seed)))
    raise ValidationError(f"embedding {name!r}: unknown kind {kind!r}")


def embeddings(cfg: RunConfig, g: Graph, sims) -> dict:
    if not cfg.embeddings:
        raise ValidationError("config lists no embeddings")
    built = {}
    for name, entry in cfg.embeddings.items():
        built[name] = _embedding(cfg, g, name, entry, built, sims)
    return built


# ---------------------------------------------------------------------------
# interpret


def _baseline_scores(method: str, z, sims, cfg: RunConfig, p: CoherenceParams) -> dict:
    scorer = (KendallTauScorer(cfg.kendall_pair_sample, p.seed) if method == "KendallTau"
              else PropertyClassScorer(p))
    return {s.relation.name: float(scorer.score(z, s)) for s in sims}


def _baseline_config(method: str, cfg: RunConfig) -> dict:
    if method == "KendallTau":
        return {"statistic": "tau-b", "pairs": "s(u,v) vs -d(u,v)",
                "pair_sample": cfg.kendall_pair_sample}
    return {"features": "|z_u - z_v| ++ z_u * z_v", "classifier": "logistic regression",
            "l2": 1e-2, "tol": 1e-6, "test_fraction": 0.2, "pairs_per_query": 10}


def cmd_interpret(cfg: RunConfig) -> dict:
    g = _graph(cfg)
    p = cfg.coherence_params()
    sims, _ = similarities(cfg, g)
    embs = embeddings(cfg, g, sims)
    names = [s.relation.name for s in sims]
    if cfg.weights is not None and set(cfg.weights) != set(names):
        raise ValidationError(f"weights {sorted(cfg.weights)} do not cover relations {sorted(names)}")
    scorer = NCIScorer(p)
    reports, outputs = {}, []
    with _executor(cfg) as ex:
        for name, z in embs.items():
            if "NCI" in cfg.methods:
                rep = interpret_embedding(z, sims, model=name, weights=cfg.weights,
                                          scorer=scorer, executor=ex)
                doc = rep.to_dict()
            else:
                doc = {"model": name, "source": z.source, "params": asdict(p)}
            others = [m for m in cfg.methods if m != "NCI"]
            if others:
                doc["baseline_scores"] = {m: _baseline_scores(m, z, sims, cfg, p) for m in others}
                doc["baseline_config"] = {m: _baseline_config(m, cfg) for m in others}
            path = cfg.out_path / f"report_{name}.json"
            _write_json(path, doc)
            outputs.append(path)
            reports[name] = doc
    if "NCI" in cfg.methods:
        table = comparison_table(reports, names, cfg.weights)
        path = cfg.out_path / "comparison.csv"
        _write_text(path, table)
        outputs.append(path)
    return {"reports": reports, "outputs": outputs}


def comparison_table(reports: dict, names: list[str], weights=None) -> str:
    """Coherence rates per model plus a ``Random`` row of averaged null bounds,
    sorted by model coherence score (descending; name breaks ties)."""
    weights = weights or {r: 1.0 / len(names) for r in names}
    rows = []
    bounds = {r: [] for r in names}
    for name, doc in reports.items():
        rates = {r["name"]: r["coherence_rate"] for r in doc["relations"]}
        for r in doc["relations"]:
            bounds[r["name"]].append(0.5 * (r["clustering_bound"] + r["smoothness_bound"]))
        rows.append((name, doc["model_coherence_score"], [rates[r] for r in names]))
    rnd = {r: float(np.mean(v)) for r, v in bounds.items()}
    rows.append(("Random", model_coherence_score(rnd, weights), [rnd[r] for r in names]))
    rows.sort(key=lambda t: (-t[1], t[0]))
    return _csv_text(["model", "model_coherence_score"] + names,
                     [[m, _fmt(o)] + [_fmt(v) for v in vals] for m, o, vals in rows])


# ---------------------------------------------------------------------------
# evaluate-method


def cmd_evaluate_method(cfg: RunConfig) -> dict:
    g = _graph(cfg)
    p = cfg.coherence_params()
    specs = cfg.relation_specs(g)
    sims, _ = similarities(cfg, g, specs)
    cache = ImeCache(g, specs)
    for s in sims:
        cache.put_similarity(s)
    dims = cfg.dims if cfg.dims is not None else [g.num_nodes]
    with _executor(cfg) as ex:
        results = expressiveness_sweep(g, dims=sorted(int(d) for d in dims), methods=cfg.methods,
                                       params=p, cache=cache,
                                       kendall_pair_sample=cfg.kendall_pair_sample, executor=ex)
    doc = {"relations": [s.name for s in specs],
           "clamped_fraction": {s.name: cache.basis(s).clamped_fraction for s in specs},
           "results": [r.to_dict() for r in results]}
    outputs = [cfg.out_path / "evaluate.json", cfg.out_path / "mrr_table.csv"]
    _write_json(outputs[0], doc)
    _write_text(outputs[1], _csv_text(
        ["method", "d", "expressiveness", "mrr"],
        [[r.method, r.d, _fmt(r.expressiveness), _fmt(r.mrr)] for r in results]))
    if cfg.dims is not None:
        path = cfg.out_path / "sweep.csv"
        rows = [row for r in results for row in r.flat_rows()]
        _write_text(path, _csv_text(list(rows[0]), [list(row.values()) for row in rows]))
        outputs.append(path)
    return {"results": results, "outputs": outputs}


# ---------------------------------------------------------------------------
# correlate


def read_metrics(path) -> dict:
    """``model,task,metric`` table -> ``{task: {model: value}}``."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except FileNotFoundError:
        raise ValidationError(f"metrics file not found: {path}") from None
    if not rows or [c.strip() for c in rows[0]] != ["model", "task", "metric"]:
        raise ParseError("header must be 'model,task,metric'", path, 1)
    out: dict = {}
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", path, lineno)
        model, task, val = (c.strip() for c in row)
        try:
            out.setdefault(task, {})[model] = float(val)
        except ValueError:
            raise ParseError(f"metric {val!r} is not a number", path, lineno) from None
    return out


def cmd_correlate(cfg: RunConfig, metrics_path) -> dict:
    metrics = read_metrics(metrics_path)
    reports = {}
    for task, per_model in metrics.items():
        for model in per_model:
            if model in reports:
                continue
            path = cfg.out_path / f"report_{model}.json"
            if not path.is_file():
                raise NodeReferenceError(f"no coherence report for model {model!r} ({path})")
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            if "relations" not in doc:
                raise ValidationError(f"{path} has no coherence rates (was NCI configured?)")
            reports[model] = doc
    out = {}
    for task in sorted(metrics):
        models = sorted(metrics[task])
        if len(models) < 2:
            raise UndefinedCorrelationError(f"task {task!r}: need at least two models")
        y = [metrics[task][m] for m in models]
        try:
            omega = pearson_correlation([reports[m]["model_coherence_score"] for m in models], y)
        except UndefinedCorrelationError as exc:
            raise UndefinedCorrelationError(f"task {task!r}: {exc}") from None
        rels = {}
        names = [r["name"] for r in reports[models[0]]["relations"]]
        for rel in names:
            x = [next(r["coherence_rate"] for r in reports[m]["relations"] if r["name"] == rel)
                 for m in models]
            try:
                rels[rel] = pearson_correlation(x, y)
            except UndefinedCorrelationError:
                rels[rel] = None  # constant rate across models
        out[task] = {"models": models, "model_coherence_score": omega, "relations": rels}
    _write_json(cfg.out_path / "correlation.json", out)
    return out


# ---------------------------------------------------------------------------
# demo


def cmd_demo(directory, seed: int = 0) -> Path:
    """Write the synthetic block-model graph, a config and a metrics table."""
    from .synthetic import desk_graph
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = desk_graph()
    save_graph(g, d / "edges.txt", d / "attributes.csv", d / "labels.csv")
    save_embedding(demo_rp_embedding(g, 64, seed), d / "rp64.csv")
    cfg = {
        "seed": seed,
        "graph": {"edges": "edges.txt", "attributes": "attributes.csv", "labels": "labels.csv"},
        "embeddings": {
            "rp64": "rp64.csv",
            "evd_SPD": {"kind": "evd", "relation": "SPD", "d": 32},
            "evd_Attr": {"kind": "evd", "relation": "Attr", "d": 16},
        },
        "relations": ["Link", "SPD", "PageRank", "DegreeDist", "LabelDist", "Attr", "AttrDist"],
        "methods": ["NCI"],
        "out_dir": "out",
        "cache_dir": "cache",
    }
    _write_json(d / "config.json", cfg)
    _write_text(d / "metrics.csv", "model,task,metric\nrp64,link,0.71\nevd_SPD,link,0.80\n"
                                   "evd_Attr,link,0.55\nrp64,node,0.62\nevd_SPD,node,0.58\n"
                                   "evd_Attr,node,0.74\n")
    return d / "config.json"


# ---------------------------------------------------------------------------
# argument parsing


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text):
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nodecoherence", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="run configuration (JSON)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir")
        sp.add_argument("--cache-dir")
        sp.add_argument("--dims", type=_int_list, help="e.g. 10,50,200")
        sp.add_argument("--methods", type=_csv_list, help="e.g. NCI,KendallTau")
        sp.add_argument("--relations", type=_csv_list, help="e.g. Link,SPD,PageRank@0.9")
        sp.add_argument("--workers", type=int)

    common(sub.add_parser("relations", help="compute and cache similarity matrices"))
    common(sub.add_parser("interpret", help="coherence reports for configured embeddings"))
    common(sub.add_parser("evaluate-method", help="evaluate interpretation methods on synthesized embeddings"))
    sp = sub.add_parser("correlate", help="correlate coherence scores with task metrics")
    common(sp)
    sp.add_argument("--metrics", required=True, help="model,task,metric table")
    sp = sub.add_parser("demo", help="write a synthetic graph and config to a directory")
    sp.add_argument("directory")
    sp.add_argument("--seed", type=int, default=0)
    return ap


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "out_dir": args.out_dir,
        "cache_dir": args.cache_dir,
        "dims": args.dims,
        "methods": args.methods,
        "relations": args.relations,
        "workers": args.workers,
    }


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    if args.command == "demo":
        path = cmd_demo(args.directory, args.seed)
        print(f"wrote {path}")
        return EXIT_OK
    cfg = load_config(args.config, _overrides(args))
    if args.command == "relations":
        summary = cmd_relations(cfg)
        path = cfg.out_path / "relations.json"
        _write_json(path, summary)
        for r in summary["relations"]:
            print(f"{r['relation']:<14} range [{r['min_offdiag']:.4f}, {r['max_offdiag']:.4f}]"
                  f"  nonzero {r['nonzero_fraction']:.4f}"
                  f"  {'cached' if r['cache_hit'] else 'computed'}")
        _write_meta(cfg, "relations", started, [path])
    elif args.command == "interpret":
        res = cmd_interpret(cfg)
        table = cfg.out_path / "comparison.csv"
        if table.is_file():
            print(table.read_text(encoding="utf-8"), end="")
        _write_meta(cfg, "interpret", started, res["outputs"])
    elif args.command == "evaluate-method":
        res = cmd_evaluate_method(cfg)
        print((cfg.out_path / "mrr_table.csv").read_text(encoding="utf-8"), end="")
        _write_meta(cfg, "evaluate-method", started, res["outputs"])
    elif args.command == "correlate":
        out = cmd_correlate(cfg, args.metrics)
        for task, r in out.items():
            print(f"{task}: r(Omega, metric) = {r['model_coherence_score']:.4f}")
        _write_meta(cfg, "correlate", started, [cfg.out_path / "correlation.json"])
    return EXIT_OK


def main(argv=None) -> int:
    try:
        code = run(argv)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USER
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        code = EXIT_INTERNAL
    except CoherenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INTERNAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USER
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_INTERNAL
    return code


if __name__ == "__main__":
    sys.exit(main())
