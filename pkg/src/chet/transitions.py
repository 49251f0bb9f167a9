"""Disease-level transition functions and visit/patient pooling.

Hidden states are d×p matrices with one row per code. Only rows of the
codes a function is responsible for are computed; the rest are exact zeros.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numkernel as nk
from .numkernel import Tensor


@dataclass
class AttentionParams:
    W_q: Tensor
    W_k: Tensor
    W_v: Tensor

    @property
    def size(self) -> int:
        return self.W_q.shape[1]


@dataclass
class MGruParams:
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    @property
    def hidden(self) -> int:
        return self.U_z.shape[0]


def _rows(mask: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(mask) > 0)


def zeros(d: int, p: int) -> Tensor:
    return Tensor(np.zeros((d, p)))


def scaled_attention(Q: Tensor, K: Tensor, V: Tensor, P: AttentionParams, row_mask: np.ndarray) -> Tensor:
    """Single-head attention whose keys and outputs are restricted to ``row_mask`` rows."""
    d = Q.shape[0]
    if K.shape[0] != d or V.shape[0] != d:
        raise nk.DimensionError("Q, K, V must have the same number of rows")
    idx = _rows(row_mask)
    if idx.size == 0:
        return zeros(d, P.W_v.shape[1])
    q = nk.take_rows(Q, idx) @ P.W_q
    k = nk.take_rows(K, idx) @ P.W_k
    weights = nk.softmax_rows(nk.scale(q @ nk.transpose(k), 1.0 / math.sqrt(P.size)))
    out = weights @ (nk.take_rows(V, idx) @ P.W_v)
    return nk.scatter_rows(out, idx, d)


def attention_weights(Q: Tensor, K: Tensor, P: AttentionParams, row_mask: np.ndarray) -> np.ndarray:
    idx = _rows(row_mask)
    q = Q.data[idx] @ P.W_q.data
    k = K.data[idx] @ P.W_k.data
    logits = q @ k.T / math.sqrt(P.size)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def transition_emerging(query_source: Tensor, H_D: Tensor, mask: np.ndarray, P: AttentionParams) -> Tensor:
    """Attention transition for one emerging role.

    ``query_source`` is the previous visit's neighbour embeddings for emerging
    neighbours, or the unrelated-disease embeddings for emerging unrelated codes.
    """
    return scaled_attention(query_source, query_source, H_D, P, mask)


def _gru_rows(x: Tensor, h_prev: Tensor, P: MGruParams) -> Tensor:
    z = nk.sigmoid(x @ P.W_z + h_prev @ P.U_z + P.b_z)
    r = nk.sigmoid(x @ P.W_r + h_prev @ P.U_r + P.b_r)
    h_hat = nk.tanh(x @ P.W_h + (r * h_prev) @ P.U_h + P.b_h)
    return (1.0 - z) * h_prev + z * h_hat


def mgru_step(
    m_p: np.ndarray, H_D: Tensor, h_en: Tensor, h_eu: Tensor, h_prev: Tensor, P: MGruParams
) -> Tensor:
    """Modified GRU: gated update on persistent rows plus tanh(h_en + h_eu) on emerging rows."""
    d = H_D.shape[0]
    idx = _rows(m_p)
    h_tilde = nk.tanh(h_en + h_eu)
    if idx.size == 0:
        return h_tilde
    kept = _gru_rows(nk.take_rows(H_D, idx), nk.take_rows(h_prev, idx), P)
    return nk.scatter_rows(kept, idx, d) + h_tilde


def gru_first(m_1: np.ndarray, H_D: Tensor, P: MGruParams) -> Tensor:
    d, p = H_D.shape[0], P.hidden
    z = zeros(d, p)
    return mgru_step(m_1, H_D, z, z, z, P)


def visit_embedding(h_p: Tensor, m_t: np.ndarray, pool_all: bool = False) -> Tensor:
    """Columnwise max over the diagnosed rows of ``h_p`` (all rows if ``pool_all``)."""
    if pool_all:
        return nk.max_rows(h_p)
    idx = _rows(m_t)
    if idx.size == 0:
        raise ValueError("visit embedding of an empty visit")
    return nk.max_rows(nk.take_rows(h_p, idx))


def patient_embedding(visit_embs: list[Tensor], W_alpha: Tensor) -> tuple[Tensor, Tensor]:
    """Location-based attention over visit embeddings; returns (o, alpha)."""
    if not visit_embs:
        raise ValueError("need at least one visit")
    V = nk.concat_rows(visit_embs)
    alpha = nk.softmax_rows(nk.transpose(V @ W_alpha))
    return alpha @ V, alpha
