import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from nodecoherence import kernels
from nodecoherence.embeddings import sample_pairs

from .oracles import inversions_bruteforce, tau_b_bruteforce

BACKENDS = sorted(kernels.BACKENDS)


def test_compiled_backend_selected_when_built():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-5, 5), max_size=40))
def test_inversions_match_bruteforce(backend, values):
    v = np.array(values, dtype=np.float64)
    assert kernels.count_inversions(v, backend=backend) == inversions_bruteforce(v)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(40))
def test_tau_b_exact_on_small_inputs(backend, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 61))
    levels = int(rng.integers(2, 12))
    x = rng.integers(0, levels, n).astype(float)
    y = rng.integers(0, levels, n).astype(float)
    want = tau_b_bruteforce(x, y)
    got = kernels.kendall_tau_b(x, y, backend=backend)
    if np.isnan(want):
        assert np.isnan(got)
    else:
        assert got == want


def test_tau_b_hand_built_tie_group():
    x = np.array([1.0, 2.0, 2.0, 3.0, 4.0])
    y = np.array([1.0, 3.0, 2.0, 2.0, 5.0])
    # concordant 7, discordant 1, tied-in-x-only 1, tied-in-y-only 1
    assert kernels.kendall_tau_b(x, y) == pytest.approx(6 / np.sqrt(9 * 9))
    assert kernels.kendall_tau_b(x, y) == tau_b_bruteforce(x, y)


def test_tau_b_agrees_with_scipy():
    rng = np.random.default_rng(9)
    x = np.round(rng.random(5000), 2)
    y = np.round(x + 0.3 * rng.random(5000), 2)
    assert kernels.kendall_tau_b(x, y) == pytest.approx(scipy.stats.kendalltau(x, y).statistic, abs=1e-12)


def test_tau_b_perfect():
    x = np.arange(10.0)
    assert kernels.kendall_tau_b(x, x) == 1.0
    assert kernels.kendall_tau_b(x, -x) == -1.0
    assert np.isnan(kernels.kendall_tau_b(x, np.ones(10)))


@pytest.mark.parametrize("n", [2, 3, 7, 50, 2001])
def test_sample_pairs_unordered_index_map(n):
    # all but one pair drawn: distinct upper-triangle pairs, so the map is a bijection
    rng = np.random.default_rng(0)
    total = n * (n - 1) // 2
    u, v = sample_pairs(n, total - 1, rng)
    assert (u >= 0).all() and (u < v).all() and (v < n).all()
    assert np.unique(u * n + v).size == total - 1


def test_sample_pairs_ordered():
    rng = np.random.default_rng(1)
    u, v = sample_pairs(6, 20, rng, ordered=True)
    assert (u != v).all()
    assert len(set(zip(u.tolist(), v.tolist()))) == 20


def test_sample_pairs_exhaustive_when_small():
    u, v = sample_pairs(5, 100, np.random.default_rng(0))
    assert len(u) == 10


def test_sample_pairs_uniform_over_rows():
    # every unordered pair equally likely: row u carries n - 1 - u of them
    n = 40
    rng = np.random.default_rng(3)
    u, _ = sample_pairs(n, 600, rng)
    counts = np.bincount(u, minlength=n)
    expect = 600 * (n - 1 - np.arange(n)) / (n * (n - 1) / 2)
    assert scipy.stats.chisquare(counts[:-1], expect[:-1] * counts[:-1].sum() / expect[:-1].sum()).pvalue > 1e-4
