import json
import shutil

import numpy as np
import pytest

from nodecoherence import cli
from nodecoherence.cli import EXIT_OK, EXIT_USER, main


def write_config(path, **cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture
def path3(tmp_path):
    (tmp_path / "edges.txt").write_text("a b\nb c\n")
    return tmp_path


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("demo")
    assert main(["demo", str(d)]) == EXIT_OK
    return d


def fresh_demo(demo_dir, tmp_path, **changes):
    """Copy of the demo inputs with a rewritten config."""
    d = tmp_path / "run"
    shutil.copytree(demo_dir, d, ignore=shutil.ignore_patterns("out", "cache"))
    cfg = json.loads((d / "config.json").read_text())
    cfg.update(changes)
    (d / "config.json").write_text(json.dumps(cfg))
    return d


def read(p):
    return p.read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# relations

def test_relations_three_node_path(path3, capsys):
    cfg = write_config(path3 / "run.json", seed=0, graph={"edges": "edges.txt"},
                       relations=["Link", "SPD"], cache_dir="cache")
    assert main(["relations", "--config", cfg]) == EXIT_OK
    summary = json.loads(read(path3 / "out" / "relations.json"))
    rows = {r["relation"]: r for r in summary["relations"]}
    assert rows["SPD"]["min_offdiag"] == pytest.approx(0.5)
    assert rows["SPD"]["max_offdiag"] == pytest.approx(1.0)
    assert rows["SPD"]["nonzero_fraction"] == 1.0
    assert rows["Link"]["nonzero_fraction"] == pytest.approx(4 / 6)
    assert len(list((path3 / "cache").iterdir())) == 2
    assert not any(r["cache_hit"] for r in summary["relations"])
    assert "computed" in capsys.readouterr().out


def test_relations_warm_cache_hits(path3):
    cfg = write_config(path3 / "run.json", seed=0, graph={"edges": "edges.txt"},
                       relations=["Link", "SPD"], cache_dir="cache")
    main(["relations", "--config", cfg])
    first = read(path3 / "out" / "relations.json")
    assert main(["relations", "--config", cfg]) == EXIT_OK
    second = json.loads(read(path3 / "out" / "relations.json"))
    assert all(r["cache_hit"] for r in second["relations"])
    hashes = [r["content_hash"] for r in json.loads(first)["relations"]]
    assert hashes == [r["content_hash"] for r in second["relations"]]


def test_attribute_relation_without_attributes(path3, capsys):
    cfg = write_config(path3 / "run.json", seed=0, graph={"edges": "edges.txt"}, relations=["Attr"])
    assert main(["relations", "--config", cfg]) == EXIT_USER
    assert "error" in capsys.readouterr().err


def test_default_relations_skip_unavailable(path3):
    cfg = write_config(path3 / "run.json", seed=0, graph={"edges": "edges.txt"})
    assert main(["relations", "--config", cfg]) == EXIT_OK
    names = [r["relation"] for r in json.loads(read(path3 / "out" / "relations.json"))["relations"]]
    assert "Attr" not in names and "LabelDist" not in names and "SPD" in names


def test_meta_sidecar(path3):
    cfg = write_config(path3 / "run.json", seed=0, graph={"edges": "edges.txt"}, relations=["SPD"])
    main(["relations", "--config", cfg])
    meta = json.loads(read(path3 / "out" / "relations.meta.json"))
    assert meta["command"] == "relations"


# ---------------------------------------------------------------------------
# config errors

@pytest.mark.parametrize("cfg", [
    {"graph": {"edges": "edges.txt"}},                                    # no seed
    {"seed": 0},                                                          # no graph
    {"seed": 0, "graph": {"edges": "missing.txt"}},
    {"seed": 0, "graph": {"edges": "edges.txt"}, "bogus": 1},
    {"seed": 0, "graph": {"edges": "edges.txt"}, "params": {"seed": 3}},
    {"seed": 0, "graph": {"edges": "edges.txt"}, "params": {"eta_s_percentile": 150}},
    {"seed": 0, "graph": {"edges": "edges.txt"}, "methods": ["Magic"]},
    {"seed": 0, "graph": {"edges": "edges.txt"}, "relations": ["Nope"]},
    {"seed": 0, "graph": {"edges": "edges.txt"}, "workers": 0},
])
def test_config_errors_exit_2(path3, cfg):
    assert main(["relations", "--config", write_config(path3 / "run.json", **cfg)]) == EXIT_USER


def test_missing_config_file(tmp_path):
    assert main(["relations", "--config", str(tmp_path / "none.json")]) == EXIT_USER


def test_invalid_json(tmp_path):
    (tmp_path / "bad.json").write_text("{seed: 0")
    assert main(["relations", "--config", str(tmp_path / "bad.json")]) == EXIT_USER


def test_override_seed(path3):
    cfg = write_config(path3 / "run.json", graph={"edges": "edges.txt"}, relations=["SPD"])
    assert main(["relations", "--config", cfg, "--seed", "4"]) == EXIT_OK


# ---------------------------------------------------------------------------
# interpret

def test_interpret_reports_and_table(demo_dir, tmp_path):
    d = fresh_demo(demo_dir, tmp_path)
    assert main(["interpret", "--config", str(d / "config.json")]) == EXIT_OK
    for name in ("rp64", "evd_SPD", "evd_Attr"):
        rep = json.loads(read(d / "out" / f"report_{name}.json"))
        assert rep["model"] == name
        assert 0.0 <= rep["model_coherence_score"] <= 1.0
        assert len(rep["relations"]) == 7
    lines = read(d / "out" / "comparison.csv").splitlines()
    assert lines[0].startswith("model,model_coherence_score,Link,SPD")
    models = [ln.split(",")[0] for ln in lines[1:]]
    assert sorted(models) == sorted(["rp64", "evd_SPD", "evd_Attr", "Random"])
    omegas = [float(ln.split(",")[1]) for ln in lines[1:]]
    assert omegas == sorted(omegas, reverse=True)
    assert models[0] == "evd_SPD"


def test_interpret_with_baselines(demo_dir, tmp_path):
    d = fresh_demo(demo_dir, tmp_path, relations=["Link", "SPD"],
                   embeddings={"rp64": "rp64.csv"}, methods=["NCI", "KendallTau"],
                   kendall_pair_sample=2000)
    assert main(["interpret", "--config", str(d / "config.json")]) == EXIT_OK
    rep = json.loads(read(d / "out" / "report_rp64.json"))
    assert set(rep["baseline_scores"]["KendallTau"]) == {"Link", "SPD"}
    assert rep["baseline_config"]["KendallTau"]["pair_sample"] == 2000


def test_interpret_embedding_graph_mismatch(demo_dir, tmp_path):
    d = fresh_demo(demo_dir, tmp_path, embeddings={"bad": "bad.csv"})
    (d / "bad.csv").write_text("node,e1\n0,1.0\n1,2.0\n")
    assert main(["interpret", "--config", str(d / "config.json")]) == EXIT_USER


def test_interpret_weights_must_cover_relations(demo_dir, tmp_path):
    d = fresh_demo(demo_dir, tmp_path, relations=["Link", "SPD"], weights={"Link": 1.0})
    assert main(["interpret", "--config", str(d / "config.json")]) == EXIT_USER


# ---------------------------------------------------------------------------
# evaluate-method

def test_evaluate_three_methods(demo_dir, tmp_path):
    d = fresh_demo(demo_dir, tmp_path, relations=["Link", "SPD", "Attr"],
                   methods=["NCI", "KendallTau", "PropertyClass"], kendall_pair_sample=5000)
    assert main(["evaluate-method", "--config", str(d / "config.json")]) == EXIT_OK
    rows = read(d / "out" / "mrr_table.csv").splitlines()
    assert rows[0] == "method,d,expressiveness,mrr"
    assert [r.split(",")[0] for r in rows[1:]] == ["NCI", "KendallTau", "PropertyClass"]
    assert float(rows[1].split(",")[3]) == 1.0
    assert not (d / "out" / "sweep.csv").exists()


def test_evaluate_dims_sweep(demo_dir, tmp_path):
    d = fresh_demo(demo_dir, tmp_path, relations=["Link", "SPD"])
    cfg = str(d / "config.json")
    assert main(["evaluate-method", "--config", cfg, "--dims", "5,50", "--methods", "NCI"]) == EXIT_OK
    rows = read(d / "out" / "mrr_table.csv").splitlines()[1:]
    assert [tuple(r.split(",")[:2]) for r in rows] == [("NCI", "5"), ("NCI", "50")]
    sweep = read(d / "out" / "sweep.csv").splitlines()
    assert len(sweep) == 1 + 2 * 2 * 2


def test_evaluate_bad_dimension(demo_dir, tmp_path):
    d = fresh_demo(demo_dir, tmp_path, relations=["Link", "SPD"])
    assert main(["evaluate-method", "--config", str(d / "config.json"), "--dims", "0"]) == EXIT_USER


# ---------------------------------------------------------------------------
# correlate

@pytest.fixture(scope="module")
def interpreted(demo_dir):
    assert main(["interpret", "--config", str(demo_dir / "config.json")]) == EXIT_OK
    reports = {m: json.loads(read(demo_dir / "out" / f"report_{m}.json"))
               for m in ("rp64", "evd_SPD", "evd_Attr")}
    return demo_dir, reports


def test_correlate_proportional_metrics(interpreted, tmp_path):
    d, reports = interpreted
    lines = ["model,task,metric"] + [f"{m},t,{0.5 * r['model_coherence_score']!r}"
                                     for m, r in reports.items()]
    (tmp_path / "m.csv").write_text("\n".join(lines) + "\n")
    assert main(["correlate", "--config", str(d / "config.json"), "--metrics", str(tmp_path / "m.csv")]) == EXIT_OK
    out = json.loads(read(d / "out" / "correlation.json"))
    assert out["t"]["model_coherence_score"] == pytest.approx(1.0)


def test_correlate_matches_hand_pearson(interpreted):
    d, reports = interpreted
    assert main(["correlate", "--config", str(d / "config.json"), "--metrics", str(d / "metrics.csv")]) == EXIT_OK
    out = json.loads(read(d / "out" / "correlation.json"))
    models = sorted(reports)
    metric = {"rp64": 0.71, "evd_SPD": 0.80, "evd_Attr": 0.55}
    x = [reports[m]["model_coherence_score"] for m in models]
    y = [metric[m] for m in models]
    assert out["link"]["model_coherence_score"] == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)
    assert out["link"]["models"] == models
    for rel, r in out["link"]["relations"].items():
        assert r is None or -1.0 <= r <= 1.0


def test_correlate_constant_metric(interpreted, tmp_path):
    d, _ = interpreted
    (tmp_path / "m.csv").write_text("model,task,metric\nrp64,t,0.5\nevd_SPD,t,0.5\nevd_Attr,t,0.5\n")
    assert main(["correlate", "--config", str(d / "config.json"), "--metrics", str(tmp_path / "m.csv")]) == EXIT_USER


def test_correlate_unknown_model(interpreted, tmp_path):
    d, _ = interpreted
    (tmp_path / "m.csv").write_text("model,task,metric\nrp64,t,0.5\nghost,t,0.7\n")
    assert main(["correlate", "--config", str(d / "config.json"), "--metrics", str(tmp_path / "m.csv")]) == EXIT_USER


def test_correlate_bad_header(interpreted, tmp_path):
    d, _ = interpreted
    (tmp_path / "m.csv").write_text("a,b,c\n")
    assert main(["correlate", "--config", str(d / "config.json"), "--metrics", str(tmp_path / "m.csv")]) == EXIT_USER


# ---------------------------------------------------------------------------
# determinism

def outputs(d):
    return {p.name: p.read_bytes() for p in sorted((d / "out").iterdir())
            if not p.name.endswith(".meta.json")}


def test_byte_identical_serial_parallel_and_cached(demo_dir, tmp_path):
    runs = []
    for i, workers in enumerate((1, 4, 1)):
        d = fresh_demo(demo_dir, tmp_path / str(i), relations=["Link", "SPD", "PageRank", "Attr"],
                       cache_dir=str(tmp_path / "shared_cache"), workers=workers)
        cfg = str(d / "config.json")
        assert main(["interpret", "--config", cfg]) == EXIT_OK
        assert main(["evaluate-method", "--config", cfg, "--dims", "20,200"]) == EXIT_OK
        runs.append(outputs(d))
    assert runs[0] == runs[1] == runs[2]
    assert set(runs[0]) >= {"comparison.csv", "evaluate.json", "mrr_table.csv", "sweep.csv"}


def test_cli_module_exposes_exit_codes():
    assert (cli.EXIT_OK, cli.EXIT_INTERNAL, cli.EXIT_USER) == (0, 1, 2)
