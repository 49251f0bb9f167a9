import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chet import numkernel as nk
from chet.cograph import build_graph
from chet.dyngraph import (
    aggregate_optimized,
    graph_layer,
    neighbor_vector,
    oracle_aggregate,
    oracle_subgraphs,
    split_roles,
)
from chet.verify import definitional_subgraphs, random_instance
from conftest import WORKED_VISITS


def vec(d, idx):
    v = np.zeros(d)
    v[list(idx)] = 1.0
    return v


@pytest.fixture
def worked():
    return build_graph(WORKED_VISITS, 4)


def test_neighbors_worked(worked):
    np.testing.assert_array_equal(neighbor_vector(vec(4, [0]), worked), vec(4, [1, 2]))
    np.testing.assert_array_equal(neighbor_vector(vec(4, [0, 1, 2]), worked), np.zeros(4))
    assert neighbor_vector(vec(4, [3]), worked).sum() == 0


def test_neighbors_empty_graph():
    g = build_graph([[(0,), (1,)]], 3)
    assert neighbor_vector(vec(3, [0, 1]), g).sum() == 0


def test_neighbor_modes_differ_on_one_way_edge():
    g = build_graph([[(0, 1)]], 3)
    A = g.A.copy()
    A[1, 0] = 0.0  # keep only 0 -> 1
    from chet.cograph import CoGraph

    one_way = CoGraph(A, 0.01)
    np.testing.assert_array_equal(neighbor_vector(vec(3, [1]), one_way, "union"), vec(3, [0]))
    assert neighbor_vector(vec(3, [1]), one_way, "out").sum() == 0


def test_roles_worked():
    r = split_roles(vec(4, [0, 1, 2]), vec(4, [0, 1]), vec(4, [2]))
    np.testing.assert_array_equal(r.persistent, vec(4, [0, 1]))
    np.testing.assert_array_equal(r.emerging_neighbor, vec(4, [2]))
    assert r.emerging_unrelated.sum() == 0
    r = split_roles(vec(4, [0]), vec(4, [3]), np.zeros(4))
    np.testing.assert_array_equal(r.emerging_unrelated, vec(4, [0]))
    same = vec(4, [1, 3])
    r = split_roles(same, same, np.zeros(4))
    np.testing.assert_array_equal(r.persistent, same)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_role_partition(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 30))
    m_t, m_prev = (rng.random(d) < 0.4).astype(float), (rng.random(d) < 0.4).astype(float)
    n_prev = ((rng.random(d) < 0.4) & (m_prev == 0)).astype(float)
    r = split_roles(m_t, m_prev, n_prev)
    parts = np.vstack([r.persistent, r.emerging_neighbor, r.emerging_unrelated])
    assert parts.sum(axis=0).max(initial=0) <= 1
    np.testing.assert_array_equal(parts.sum(axis=0), m_t)


def test_subgraphs_worked(worked):
    A = nk.constant(worked.A)
    S = oracle_subgraphs(vec(4, [0]), vec(4, [1, 2]), A)
    assert not S.Mt.data.any()
    np.testing.assert_allclose(S.Bt.data[0], [0, 2 / 3, 1 / 3, 0])
    assert S.Bhat_t.data[1, 0] == pytest.approx(1 / 2) and S.Bhat_t.data[2, 0] == pytest.approx(1 / 3)
    assert S.Nt.data[1, 2] == pytest.approx(1 / 2) and S.Nt.data[2, 1] == pytest.approx(2 / 3)
    S = oracle_subgraphs(vec(4, [0, 1]), np.zeros(4), A)
    assert not (S.Bt.data.any() or S.Bhat_t.data.any() or S.Nt.data.any())


def test_aggregate_worked(worked):
    A = nk.constant(worked.A)
    m, n = vec(4, [0]), vec(4, [1, 2])
    ones = nk.constant(np.ones((4, 1)))
    zd, zn = oracle_aggregate(m, n, oracle_subgraphs(m, n, A), ones, ones)
    assert zd.data[0, 0] == pytest.approx(2.0)
    assert zd.data[1:].sum() == 0 and zn.data[[0, 3]].sum() == 0
    od, on = aggregate_optimized(m, n, A, ones, ones)
    np.testing.assert_allclose(od.data, zd.data, atol=1e-12)
    np.testing.assert_allclose(on.data, zn.data, atol=1e-12)


def test_aggregate_saturated_mask(worked):
    A = nk.constant(worked.A)
    M = nk.constant(np.random.default_rng(0).normal(size=(4, 3)))
    zd, _ = aggregate_optimized(np.ones(4), np.zeros(4), A, M, M)
    np.testing.assert_allclose(zd.data, M.data + worked.A @ M.data)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_subgraph_identities(seed):
    inst = random_instance(seed, 50)
    S = oracle_subgraphs(inst.m, inst.n, nk.constant(inst.graph.A))
    for got, want in zip((S.Mt, S.Bt, S.Bhat_t, S.Nt), definitional_subgraphs(inst.graph.A, inst.m, inst.n)):
        np.testing.assert_array_equal(got.data, want)
    assert not np.any(inst.m * inst.n)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimized_matches_dense(seed):
    inst = random_instance(seed, 50)
    A = nk.constant(inst.graph.A)
    M, N = nk.constant(inst.M), nk.constant(inst.N)
    zd, zn = oracle_aggregate(inst.m, inst.n, oracle_subgraphs(inst.m, inst.n, A), M, N)
    od, on = aggregate_optimized(inst.m, inst.n, A, M, N)
    np.testing.assert_allclose(od.data, zd.data, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(on.data, zn.data, rtol=1e-10, atol=1e-12)


def test_optimized_allocates_no_dense_matrix():
    inst = random_instance(7, 50, s=4)
    d = inst.graph.d
    A = nk.constant(inst.graph.A)
    M, N = nk.parameter(inst.M), nk.parameter(inst.N)
    with nk.track_allocations() as tr:
        with nk.GradTape() as tape:
            zd, zn = aggregate_optimized(inst.m, inst.n, A, M, N)
            loss = nk.mean_all(zd) + nk.mean_all(zn)
        tape.gradient(loss, [M, N])
    assert max(s[1] for s in tr.shapes) <= 4
    assert tr.count_at_least(d, d) == 0
    with nk.track_allocations() as tr:
        oracle_aggregate(inst.m, inst.n, oracle_subgraphs(inst.m, inst.n, A), M, N)
    assert tr.count_at_least(d, d) > 0


def test_graph_layer():
    z = nk.constant(np.zeros((3, 2)))
    h, hn = graph_layer(z, None, nk.constant(np.ones((2, 4))))
    assert h.shape == (3, 4) and not h.data.any() and hn is None
    h, _ = graph_layer(nk.constant([[-1.0, 2.0]]), None, nk.constant(np.eye(2)))
    np.testing.assert_allclose(h.data, [[-0.01, 2.0]])
    rng = np.random.default_rng(3)
    Z, W = rng.normal(size=(5, 3)), rng.normal(size=(3, 2))
    h, _ = graph_layer(nk.constant(Z), None, nk.constant(W))
    ref = Z @ W
    np.testing.assert_allclose(h.data, np.where(ref > 0, ref, 0.01 * ref))
    with pytest.raises(nk.DimensionError):
        graph_layer(nk.constant(Z), None, nk.constant(np.ones((2, 2))))
