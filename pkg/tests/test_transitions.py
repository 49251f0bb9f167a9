import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chet import numkernel as nk
from chet.transitions import (
    AttentionParams,
    MGruParams,
    attention_weights,
    gru_first,
    mgru_step,
    patient_embedding,
    scaled_attention,
    transition_emerging,
    visit_embedding,
)


def attn_params(rng, s_prime=3, a=2, p=4):
    return AttentionParams(*(nk.parameter(rng.normal(size=sh)) for sh in [(s_prime, a), (s_prime, a), (s_prime, p)]))


def gru_params(rng, s_prime=3, p=4, zero=False):
    shapes = [(s_prime, p)] * 3 + [(p, p)] * 3 + [(1, p)] * 3
    make = (lambda sh: np.zeros(sh)) if zero else (lambda sh: rng.normal(scale=0.5, size=sh))
    return MGruParams(*(nk.parameter(make(sh)) for sh in shapes))


def mask(d, idx):
    m = np.zeros(d)
    m[list(idx)] = 1.0
    return m


def test_single_active_row_attention(rng):
    P = attn_params(rng)
    H = nk.constant(rng.normal(size=(5, 3)))
    out = scaled_attention(H, H, H, P, mask(5, [2]))
    np.testing.assert_allclose(out.data[2], H.data[2] @ P.W_v.data)
    assert not np.delete(out.data, 2, axis=0).any()


def test_identical_keys_split_evenly(rng):
    P = attn_params(rng)
    K = nk.constant(np.tile(rng.normal(size=(1, 3)), (4, 1)))
    w = attention_weights(nk.constant(rng.normal(size=(4, 3))), K, P, mask(4, [0, 3]))
    np.testing.assert_allclose(w, 0.5)


def test_attention_matches_hand_composition(rng):
    P = attn_params(rng)
    Q, K, V = (rng.normal(size=(6, 3)) for _ in range(3))
    idx = [1, 2, 4]
    out = scaled_attention(nk.constant(Q), nk.constant(K), nk.constant(V), P, mask(6, idx))
    q, k, v = Q[idx] @ P.W_q.data, K[idx] @ P.W_k.data, V[idx] @ P.W_v.data
    logits = q @ k.T / math.sqrt(2)
    w = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(out.data[idx], w @ v, atol=1e-10)
    np.testing.assert_allclose(attention_weights(nk.constant(Q), nk.constant(K), P, mask(6, idx)).sum(axis=1), 1.0)


def test_empty_role_gives_zero(rng):
    P = attn_params(rng)
    H = nk.constant(rng.normal(size=(4, 3)))
    out = transition_emerging(H, H, np.zeros(4), P)
    assert out.shape == (4, 4) and not out.data.any()


def test_zero_query_source_gives_uniform_weights(rng):
    P = attn_params(rng)
    R = nk.constant(np.zeros((5, 3)))
    H_D = nk.constant(rng.normal(size=(5, 3)))
    np.testing.assert_allclose(attention_weights(R, R, P, mask(5, [0, 1, 4])), 1 / 3)
    out = transition_emerging(R, H_D, mask(5, [0, 1, 4]), P)
    np.testing.assert_allclose(out.data[0], H_D.data[[0, 1, 4]].mean(axis=0) @ P.W_v.data)


def test_mgru_zero_weights_halves_state(rng):
    P = gru_params(rng, zero=True)
    v = rng.normal(size=4)
    h_prev = nk.constant(np.tile(v, (3, 1)))
    z = nk.constant(np.zeros((3, 4)))
    out = mgru_step(mask(3, [1]), nk.constant(rng.normal(size=(3, 3))), z, z, h_prev, P)
    np.testing.assert_allclose(out.data[1], 0.5 * v)
    assert not out.data[[0, 2]].any()


def test_mgru_without_persistent_rows(rng):
    P = gru_params(rng)
    h_en = np.zeros((4, 4))
    h_eu = np.zeros((4, 4))
    h_en[0] = rng.normal(size=4)
    h_eu[2] = rng.normal(size=4)
    out = mgru_step(np.zeros(4), nk.constant(rng.normal(size=(4, 3))), nk.constant(h_en), nk.constant(h_eu),
                    nk.constant(rng.normal(size=(4, 4))), P)
    np.testing.assert_allclose(out.data, np.tanh(h_en + h_eu))


def scalar_gru_row(x, h, P):
    """Gate-by-gate evaluation with explicit loops over hidden units."""
    W = {k: getattr(P, k).data for k in ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")}
    p = len(h)
    sig = lambda t: 1.0 / (1.0 + math.exp(-t))
    z = [sig(sum(x[i] * W["W_z"][i, j] for i in range(len(x))) + sum(h[i] * W["U_z"][i, j] for i in range(p)) + W["b_z"][0, j]) for j in range(p)]
    r = [sig(sum(x[i] * W["W_r"][i, j] for i in range(len(x))) + sum(h[i] * W["U_r"][i, j] for i in range(p)) + W["b_r"][0, j]) for j in range(p)]
    hh = [math.tanh(sum(x[i] * W["W_h"][i, j] for i in range(len(x))) + sum(r[i] * h[i] * W["U_h"][i, j] for i in range(p)) + W["b_h"][0, j]) for j in range(p)]
    return np.array([(1 - z[j]) * h[j] + z[j] * hh[j] for j in range(p)])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_mgru_matches_scalar_reference(seed):
    rng = np.random.default_rng(seed)
    d = 5
    P = gru_params(rng)
    H_D, h_prev = rng.normal(size=(d, 3)), rng.normal(size=(d, 4))
    roles = rng.permutation(d)
    m_p, m_en, m_eu = mask(d, roles[:2]), mask(d, roles[2:3]), mask(d, roles[3:4])
    h_en = np.where(m_en[:, None] > 0, rng.normal(size=(d, 4)), 0.0)
    h_eu = np.where(m_eu[:, None] > 0, rng.normal(size=(d, 4)), 0.0)
    out = mgru_step(m_p, nk.constant(H_D), nk.constant(h_en), nk.constant(h_eu), nk.constant(h_prev), P).data
    for i in range(d):
        if m_p[i]:
            want = scalar_gru_row(H_D[i], h_prev[i], P)
        elif m_en[i] or m_eu[i]:
            want = np.tanh(h_en[i] + h_eu[i])
        else:
            want = np.zeros(4)
        np.testing.assert_allclose(out[i], want, atol=1e-12)


def test_gru_first_equals_mgru_with_zero_state(rng):
    P = gru_params(rng)
    H = nk.constant(rng.normal(size=(5, 3)))
    m = mask(5, [0, 3])
    z = nk.constant(np.zeros((5, 4)))
    a = gru_first(m, H, P).data
    np.testing.assert_array_equal(a, mgru_step(m, H, z, z, z, P).data)
    assert not a[[1, 2, 4]].any()
    assert not gru_first(m, H, gru_params(rng, zero=True)).data.any()


def test_visit_embedding_pooling():
    h = nk.constant([[1.0, 0.0], [0.0, 2.0], [50.0, 50.0]])
    np.testing.assert_array_equal(visit_embedding(h, mask(3, [0, 1])).data, [[1.0, 2.0]])
    np.testing.assert_array_equal(visit_embedding(nk.constant([[0.2, -0.5]]), mask(1, [0])).data, [[0.2, -0.5]])
    np.testing.assert_array_equal(visit_embedding(h, mask(3, [0]), pool_all=True).data, [[50.0, 50.0]])
    with pytest.raises(ValueError):
        visit_embedding(h, np.zeros(3))


def test_patient_embedding_cases(rng):
    v1 = nk.constant(rng.normal(size=(1, 4)))
    o, alpha = patient_embedding([v1], nk.constant(rng.normal(size=(4, 1))))
    np.testing.assert_allclose(o.data, v1.data)
    assert alpha.data.tolist() == [[1.0]]
    v2 = nk.constant(rng.normal(size=(1, 4)))
    o, _ = patient_embedding([v1, v2], nk.constant(np.zeros((4, 1))))
    np.testing.assert_allclose(o.data, (v1.data + v2.data) / 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.floats(0.1, 10.0))
def test_patient_attention_properties(seed, T, c):
    rng = np.random.default_rng(seed)
    embs = [nk.constant(rng.normal(size=(1, 3))) for _ in range(T)]
    W = rng.normal(size=(3, 1))
    o, alpha = patient_embedding(embs, nk.constant(W))
    V = np.vstack([e.data for e in embs])
    assert alpha.data.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(o.data >= V.min(axis=0) - 1e-12) and np.all(o.data <= V.max(axis=0) + 1e-12)
    _, scaled = patient_embedding(embs, nk.constant(c * W))
    assert np.argmax(scaled.data) == np.argmax(alpha.data)
