import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from firmnet.exceptions import PanelFormatError
from firmnet.model import GrowthPanel
from firmnet.network import (
    PanelNetwork,
    Snapshot,
    adjacency,
    link_diff,
    matrix_spectral_bound,
    neighbor_growth_stats,
    spectral_bound,
    spmv,
)

from conftest import random_adjacency, random_panel


def edge_set(a):
    c = a.tocoo()
    return set(zip(c.row.tolist(), c.col.tolist()))


def test_adjacency_drops_duplicates_and_self_loops():
    a = adjacency([0, 0, 1, 2], [1, 1, 1, 0], 3)
    assert edge_set(a) == {(0, 1), (2, 0)}
    assert a.has_sorted_indices
    assert np.all(a.data == 1.0)


def test_adjacency_rejects_out_of_range():
    with pytest.raises(ValueError):
        adjacency([0], [3], 3)


def test_panel_rejects_self_loop_matrix():
    bad = sp.csr_matrix(np.eye(3))
    snap = Snapshot(adjacency([], [], 3), adjacency([], [], 3))
    object.__setattr__(snap, "G", bad)
    with pytest.raises(PanelFormatError):
        PanelNetwork(["a", "b", "c"], [2003], {2003: snap})


def test_panel_rejects_unsorted_years():
    e = adjacency([], [], 2)
    with pytest.raises(PanelFormatError):
        PanelNetwork(["a", "b"], [2004, 2003], {2003: Snapshot(e, e), 2004: Snapshot(e, e)})


def test_g_and_h_stored_independently():
    panel = PanelNetwork.from_edges(3, {2003: (np.array([[0, 1]]), np.array([[0, 1]]))})
    assert edge_set(panel.G(2003)) == edge_set(panel.H(2003)) == {(0, 1)}
    assert edge_set(panel.H(2003)) != edge_set(panel.G(2003).T)


def test_link_diff_hand_example():
    panel = PanelNetwork.from_edges(
        3,
        {
            2003: (np.array([[0, 1], [1, 2]]), np.empty((0, 2))),
            2004: (np.array([[0, 1], [2, 0]]), np.empty((0, 2))),
        },
    )
    d = link_diff(panel, 2004)
    assert d.formed_G.tolist() == [[2, 0]]
    assert d.severed_G.tolist() == [[1, 2]]
    assert d.counts == {"formed_G": 1, "severed_G": 1, "formed_H": 0, "severed_H": 0}


def test_link_diff_identical_snapshots(rng):
    g, h = random_adjacency(rng, 30, 0.1), random_adjacency(rng, 30, 0.1)
    panel = PanelNetwork.from_edges(30, {2003: (g, h), 2004: (g, h)})
    assert set(link_diff(panel, 2004).counts.values()) == {0}


def test_link_diff_first_year_is_an_error(small_panel):
    panel, _ = small_panel
    with pytest.raises(ValueError):
        link_diff(panel, panel.years[0])


def test_link_diff_matches_brute_force(rng):
    n = 200
    before = random_adjacency(rng, n, 1000 / n ** 2)
    after = random_adjacency(rng, n, 1000 / n ** 2)
    panel = PanelNetwork.from_edges(n, {1: (before, after), 2: (after, before)})
    d = link_diff(panel, 2)
    old, new = edge_set(before), edge_set(after)
    formed = [(i, j) for (i, j) in new if (i, j) not in old]
    severed = [(i, j) for (i, j) in old if (i, j) not in new]
    assert set(map(tuple, d.formed_G.tolist())) == set(formed)
    assert set(map(tuple, d.severed_G.tolist())) == set(severed)
    assert len(d.formed_G) + d.persisting_G == after.nnz
    # H swaps roles
    assert set(map(tuple, d.formed_H.tolist())) == set(severed)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_link_diff_reconstructs_snapshots(seed):
    rng = np.random.default_rng(seed)
    panel = random_panel(rng, n=25, n_years=3, density=0.1)
    for y in panel.years[1:]:
        d = link_diff(panel, y)
        prev = panel.previous_year(y)
        for rel, formed, severed in (("G", d.formed_G, d.severed_G), ("H", d.formed_H, d.severed_H)):
            old = set(map(tuple, panel.snapshot(prev).edges(rel).tolist()))
            new = set(map(tuple, panel.snapshot(y).edges(rel).tolist()))
            assert (old - set(map(tuple, severed.tolist()))) | set(map(tuple, formed.tolist())) == new


def test_neighbor_stats_single_formed_link():
    panel = PanelNetwork.from_edges(2, {1: (np.zeros((2, 2)), np.zeros((2, 2))), 2: ([[0, 1], [0, 0]], np.zeros((2, 2)))})
    growth = GrowthPanel([1, 2], [[0.0, 0.0], [0.1, 0.2]])
    severed, formed = neighbor_growth_stats(panel, growth, 2)
    assert formed.proportion_positive[0] == 1.0
    assert formed.proportion_negative[0] == 0.0
    assert severed.link_count == 0
    assert np.isnan(severed.proportion_positive[0])


def test_neighbor_stats_chain_hand_bfs():
    # a-b-c-d; a-b severed at year 2, b-c and c-d persist
    before = np.array([[0, 1], [1, 2], [2, 3]])
    after = np.array([[1, 2], [2, 3]])
    panel = PanelNetwork.from_edges(4, {1: (before, np.empty((0, 2))), 2: (after, np.empty((0, 2)))})
    growth = GrowthPanel([1, 2], [[0, 0, 0, 0], [-1.0, -1.0, 1.0, -1.0]])
    severed, _ = neighbor_growth_stats(panel, growth, 2, max_order=3)
    assert severed.proportion_positive == (0.0, 1.0, 0.0)
    assert severed.proportion_negative == (1.0, 0.0, 1.0)
    assert severed.node_count == (2, 1, 1)


def test_neighbor_stats_zero_growth_counts_as_neither():
    panel = PanelNetwork.from_edges(2, {1: (np.zeros((2, 2)), np.zeros((2, 2))), 2: ([[0, 1], [0, 0]], np.zeros((2, 2)))})
    growth = GrowthPanel([1, 2], [[0.0, 0.0], [0.0, 0.5]])
    _, formed = neighbor_growth_stats(panel, growth, 2)
    assert formed.proportion_positive[0] + formed.proportion_negative[0] == 0.5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_neighbor_stats_invariant_under_permutation(seed):
    rng = np.random.default_rng(seed)
    panel = random_panel(rng, n=30, n_years=2, density=0.08)
    growth = GrowthPanel(panel.years, rng.normal(size=(2, 30)))
    perm = rng.permutation(30)
    base = neighbor_growth_stats(panel, growth, panel.years[1])
    moved = neighbor_growth_stats(panel.permuted(perm), growth.permuted(perm), panel.years[1])
    for a, b in zip(base, moved):
        np.testing.assert_array_equal(a.proportion_positive, b.proportion_positive)
        np.testing.assert_array_equal(a.proportion_negative, b.proportion_negative)
        assert a.node_count == b.node_count
        for p, q in zip(a.proportion_positive, a.proportion_negative):
            assert np.isnan(p) or (0 <= p <= 1 and 0 <= q <= 1 and p + q <= 1)


def test_spmv_single_edge():
    a = adjacency([0], [1], 2)
    np.testing.assert_array_equal(spmv(a, 0.5, [0.0, 1.0]), [0.5, 0.0])


def test_spmv_empty_and_accumulate():
    a = adjacency([], [], 3)
    np.testing.assert_array_equal(spmv(a, 2.0, np.ones(3)), np.zeros(3))
    out = np.ones(2)
    spmv(adjacency([1], [0], 2), 2.0, np.array([3.0, 0.0]), out=out)
    np.testing.assert_array_equal(out, [1.0, 7.0])


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError):
        spmv(adjacency([], [], 3), 1.0, np.ones(4))


def test_spmv_matches_dense(rng):
    a = random_adjacency(rng, 500, 0.01)
    x = rng.normal(size=500)
    dense = 0.7 * (a.toarray() @ x)
    np.testing.assert_allclose(spmv(a, 0.7, x), dense, rtol=1e-12, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3))
def test_spmv_linear(seed, c):
    rng = np.random.default_rng(seed)
    a = random_adjacency(rng, 40, 0.1)
    x, y = rng.normal(size=40), rng.normal(size=40)
    np.testing.assert_allclose(spmv(a, c, x + y), spmv(a, c, x) + spmv(a, c, y), rtol=0, atol=1e-12)


def test_spectral_bound_empty():
    e = adjacency([], [], 5)
    b = matrix_spectral_bound(e, e, 0.5, 0.5)
    assert b.estimate == 0.0 and b.converges


def test_spectral_bound_two_cycle():
    g = adjacency([0, 1], [1, 0], 2)
    e = adjacency([], [], 2)
    assert matrix_spectral_bound(g, e, 0.06, 0.0).estimate == pytest.approx(0.06, rel=1e-12)


def test_spectral_bound_flags_dense_clique():
    n = 10
    clique = sp.csr_matrix(np.ones((n, n)) - np.eye(n))
    g = adjacency(*clique.nonzero(), n)
    e = adjacency([], [], n)
    b = matrix_spectral_bound(g, e, 0.3, 0.0)
    rho = np.max(np.abs(np.linalg.eigvals(0.3 * g.toarray())))
    assert rho == pytest.approx(2.7)
    assert b.estimate == pytest.approx(rho, rel=1e-8)
    assert not b.converges


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 0.5), st.floats(0, 0.5))
def test_spectral_estimate_below_row_sum_bound(seed, bg, bh):
    rng = np.random.default_rng(seed)
    g, h = random_adjacency(rng, 50, 0.08), random_adjacency(rng, 50, 0.08)
    b = matrix_spectral_bound(g, h, bg, bh)
    assert b.estimate <= b.row_sum_bound + 1e-15


def test_spectral_bound_panel_wrapper(small_panel):
    panel, _ = small_panel
    y = panel.years[0]
    s = panel.snapshot(y)
    assert spectral_bound(panel, y, 0.06, 0.06) == matrix_spectral_bound(s.G, s.H, 0.06, 0.06)


def test_permuted_relabels_edges(rng):
    panel = random_panel(rng, n=20, n_years=2)
    perm = rng.permutation(20)
    moved = panel.permuted(perm)
    for y in panel.years:
        old = panel.G(y).toarray()
        new = moved.G(y).toarray()
        np.testing.assert_array_equal(new[np.ix_(perm, perm)], old)
    assert [moved.firm_ids[perm[i]] for i in range(20)] == panel.firm_ids
