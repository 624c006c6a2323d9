
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodecoherence import kernels
from nodecoherence.errors import CapabilityError, ParameterError, ParseError
from nodecoherence.graph import Graph
from nodecoherence.relations import (
    KINDS,
    UNREACHABLE,
    RelationSpec,
    all_pairs_shortest_path,
    compute_similarity,
    computable_relations,
    degree_distribution_vector,
    khop_feature_distribution,
    load_similarity,
    personalized_pagerank,
    personalized_pagerank_matrix,
    save_similarity,
)

from .oracles import dense_ppr, floyd_warshall, random_graph


def G(n, edges, **kw):
    return Graph(tuple(f"v{i}" for i in range(n)), edges, **kw)


PATH3 = G(3, [[0, 1], [1, 2]])


# ---------------------------------------------------------------------------
# RelationSpec

def test_spec_names_and_parse():
    assert RelationSpec.parse("SPD").name == "SPD"
    assert RelationSpec.parse("DegreeDist@2") == RelationSpec("DegreeDist", k=2)
    assert RelationSpec.parse("PageRank@0.9").alpha == 0.9
    assert RelationSpec.parse({"kind": "LabelDist", "k": 3}).name == "LabelDist@3"
    assert not RelationSpec("PageRank").symmetric
    assert all(RelationSpec(k).symmetric for k in KINDS if k != "PageRank")


@pytest.mark.parametrize("bad", [dict(kind="Nope"), dict(kind="SPD", k=0),
                                 dict(kind="PageRank", alpha=1.0), dict(kind="PageRank", alpha=0.0)])
def test_spec_rejects(bad):
    with pytest.raises(ParameterError):
        RelationSpec(**bad)


def test_capability_errors_name_relation():
    with pytest.raises(CapabilityError, match="Attr"):
        compute_similarity(PATH3, RelationSpec("Attr"))
    with pytest.raises(CapabilityError, match="LabelDist"):
        compute_similarity(PATH3, RelationSpec("LabelDist"))
    assert [r.kind for r in computable_relations(PATH3)] == ["Link", "SPD", "PageRank", "DegreeDist"]


# ---------------------------------------------------------------------------
# per-kind examples

def test_link_single_edge():
    s = compute_similarity(G(2, [[0, 1]]), RelationSpec("Link"))
    assert s.is_sparse
    assert s.row(0)[1] == pytest.approx(0.5)
    assert s.row(0)[0] == 1.0


def test_spd_path():
    s = compute_similarity(PATH3, RelationSpec("SPD")).dense()
    assert s[0, 2] == pytest.approx(0.5)
    assert s[0, 1] == pytest.approx(1.0)
    np.testing.assert_array_equal(np.diag(s), 1.0)


def test_spd_disconnected_is_zero():
    s = compute_similarity(G(4, [[0, 1], [2, 3]]), RelationSpec("SPD")).dense()
    assert s[0, 2] == 0.0 and s[1, 3] == 0.0
    assert s[0, 1] == 1.0


def test_attr_identical_rows():
    g = G(3, [[0, 1]], attributes=[[1.0, 2.0], [1.0, 2.0], [-1.0, -2.0]])
    s = compute_similarity(g, RelationSpec("Attr")).dense()
    assert s[0, 1] == pytest.approx(1.0)
    assert s[0, 2] == 0.0  # negative cosine clamped


def test_attr_zero_vector():
    g = G(2, [[0, 1]], attributes=[[0.0, 0.0], [1.0, 0.0]])
    assert compute_similarity(g, RelationSpec("Attr")).dense()[0, 1] == 0.0


# ---------------------------------------------------------------------------
# shortest paths

def test_triangle_distances():
    dist, diam = all_pairs_shortest_path(G(3, [[0, 1], [1, 2], [0, 2]]))
    assert diam == 1
    assert (dist[~np.eye(3, dtype=bool)] == 1).all()


def test_path_distance():
    dist, diam = all_pairs_shortest_path(PATH3)
    assert dist[0, 2] == 2 and diam == 2


def test_disjoint_edges_sentinel():
    dist, diam = all_pairs_shortest_path(G(4, [[0, 1], [2, 3]]))
    assert dist[0, 2] == UNREACHABLE
    assert diam == 1


def test_row_block_keeps_global_diameter():
    g = G(4, [[0, 1], [1, 2], [2, 3]])
    dist, diam = all_pairs_shortest_path(g, [0])
    assert dist.shape == (1, 4) and diam == 3


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
@pytest.mark.parametrize("seed", range(12))
def test_bfs_matches_floyd_warshall(backend, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 31))
    g = random_graph(n, float(rng.uniform(0.02, 0.4)), seed)
    a = g.adjacency
    dist = kernels.bfs_distances(a.indptr, a.indices, np.arange(n), backend=backend)
    np.testing.assert_array_equal(dist, floyd_warshall(g))


def test_spd_monotone_in_distance():
    g = random_graph(25, 0.15, 3)
    dist, _ = all_pairs_shortest_path(g)
    s = compute_similarity(g, RelationSpec("SPD")).dense()
    for u in range(g.num_nodes):
        fin = (dist[u] > 0)
        order = np.argsort(dist[u][fin], kind="stable")
        d, v = dist[u][fin][order], s[u][fin][order]
        for i in range(len(d) - 1):
            if d[i + 1] > d[i]:
                assert v[i + 1] < v[i]


# ---------------------------------------------------------------------------
# PageRank

def test_ppr_single_node():
    np.testing.assert_allclose(personalized_pagerank(G(1, []), 0), [1.0])


def test_ppr_two_nodes():
    pi = personalized_pagerank(G(2, [[0, 1]]), 0, 0.85)
    a = 0.15 / (1 - 0.85 ** 2)
    np.testing.assert_allclose(pi, [a, 0.85 * a], atol=1e-9)
    assert pi[0] == pytest.approx(0.5405, abs=1e-4)


@pytest.mark.parametrize("seed", range(15))
def test_ppr_matches_dense_solve(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 51))
    alpha = float(rng.uniform(0.5, 0.95))
    g = random_graph(n, float(rng.uniform(0.0, 0.3)), seed)
    pi = personalized_pagerank_matrix(g, alpha=alpha)
    np.testing.assert_allclose(pi, dense_ppr(g, alpha), atol=1e-8)
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-8)


def test_pagerank_similarity_directed_unit_diagonal():
    g = random_graph(12, 0.3, 1)
    s = compute_similarity(g, RelationSpec("PageRank"))
    assert not s.symmetric
    np.testing.assert_array_equal(np.diag(s.dense()), 1.0)
    sym = s.as_symmetric()
    np.testing.assert_allclose(sym.dense(), sym.dense().T)


# ---------------------------------------------------------------------------
# distributions

def test_label_distribution_path():
    g = G(3, [[0, 1], [1, 2]], labels=[0, 1, 0])
    y = khop_feature_distribution(g, g.one_hot_labels(), 1)
    np.testing.assert_array_equal(y[0], [0, 1])


def test_label_distribution_counts():
    g = G(4, [[0, 1], [0, 2], [0, 3]], labels=[0, 0, 0, 1])
    y = khop_feature_distribution(g, g.one_hot_labels(), 1)
    np.testing.assert_allclose(y[0], [2 / 3, 1 / 3])


def test_distribution_isolated_zero():
    g = G(3, [[0, 1]], labels=[0, 1, 0])
    np.testing.assert_array_equal(khop_feature_distribution(g, g.one_hot_labels(), 1)[2], 0)


@pytest.mark.parametrize("seed", range(8))
def test_khop_one_matches_neighbour_average(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 21))
    g = random_graph(n, 0.3, seed)
    f = rng.random((n, 4))
    got = khop_feature_distribution(g, f, 1)
    for u in range(n):
        nb = [v for v in range(n) if g.adjacency[u, v]]
        if not nb:
            np.testing.assert_array_equal(got[u], 0)
            continue
        total = sum(f[v] for v in nb)
        np.testing.assert_allclose(got[u], total / total.sum(), atol=1e-12)


def test_degree_distribution_star():
    star = G(4, [[0, 1], [0, 2], [0, 3]])
    np.testing.assert_array_equal(degree_distribution_vector(star, 0), [1, 0, 0])
    np.testing.assert_array_equal(degree_distribution_vector(star, 1), [0, 0, 1])


def test_degree_distribution_isolated():
    g = G(3, [[0, 1]])
    np.testing.assert_array_equal(degree_distribution_vector(g, 2), [0])
    s = compute_similarity(g, RelationSpec("DegreeDist")).dense()
    assert s[2, 0] == 0.0 and s[2, 2] == 1.0


def test_degree_distribution_exact_two_hops():
    # path 0-1-2-3: nodes exactly 2 hops from 0 = {2} (degree 2)
    g = G(4, [[0, 1], [1, 2], [2, 3]])
    np.testing.assert_array_equal(degree_distribution_vector(g, 0, k=2), [0, 1])


# ---------------------------------------------------------------------------
# properties over random graphs

@settings(max_examples=25, deadline=None)
@given(st.integers(2, 18), st.floats(0.0, 0.6), st.integers(0, 10_000))
def test_ranges_and_symmetry(n, p, seed):
    rng = np.random.default_rng(seed)
    g0 = random_graph(n, p, seed)
    g = Graph(g0.node_ids, g0.edges, rng.standard_normal((n, 3)), rng.integers(0, 3, n))
    for spec in computable_relations(g):
        s = compute_similarity(g, spec).dense()
        assert s.min() >= 0.0 and s.max() <= 1.0, spec.name
        np.testing.assert_array_equal(np.diag(s), 1.0)
        if spec.symmetric:
            np.testing.assert_allclose(s, s.T, atol=1e-15, err_msg=spec.name)


def test_row_block_matches_full():
    rng = np.random.default_rng(0)
    g0 = random_graph(15, 0.25, 0)
    g = Graph(g0.node_ids, g0.edges, rng.random((15, 3)), rng.integers(0, 2, 15))
    rows = [3, 7, 11]
    for spec in computable_relations(g):
        full = compute_similarity(g, spec).dense()
        block = compute_similarity(g, spec, rows=rows)
        for u in rows:
            np.testing.assert_allclose(block.row(u), full[u], atol=1e-12, err_msg=spec.name)


# ---------------------------------------------------------------------------
# text cache

@pytest.mark.parametrize("kind", ["Link", "SPD", "PageRank", "DegreeDist"])
def test_cache_round_trip(tmp_path, kind):
    g = random_graph(14, 0.25, 5)
    s = compute_similarity(g, RelationSpec(kind))
    save_similarity(s, tmp_path / "s.csv")
    t = load_similarity(tmp_path / "s.csv")
    assert t.relation == s.relation and t.symmetric == s.symmetric
    np.testing.assert_array_equal(t.dense(), s.dense())
    assert t.content_hash() == s.content_hash()
    assert (tmp_path / "s.csv").read_text().startswith("relation,kind,k,alpha,n\n")


def test_cache_round_trip_row_block(tmp_path):
    g = random_graph(10, 0.3, 2)
    s = compute_similarity(g, RelationSpec("SPD"), rows=[1, 4])
    save_similarity(s, tmp_path / "b.csv")
    t = load_similarity(tmp_path / "b.csv")
    np.testing.assert_array_equal(t.rows, [1, 4])
    np.testing.assert_array_equal(t.row(4), s.row(4))


def test_cache_bad_header(tmp_path):
    (tmp_path / "x.csv").write_text("nope\n1,2\n")
    with pytest.raises(ParseError):
        load_similarity(tmp_path / "x.csv")
