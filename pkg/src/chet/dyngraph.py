"""Per-visit dynamic subgraphs and the graph layer.

Two routes compute the same aggregation. ``oracle_subgraphs`` +
``oracle_aggregate`` materialise the four d×d visit subgraphs literally.
``aggregate_optimized`` only ever multiplies the static adjacency by
row-masked d×s embeddings, so no per-visit d×d matrix exists.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkernel as nk
from .cograph import CoGraph
from .numkernel import Tensor

NEIGHBOR_MODES = ("union", "out")


@dataclass(frozen=True)
class VisitMasks:
    m: np.ndarray
    n: np.ndarray


@dataclass(frozen=True)
class RoleMasks:
    persistent: np.ndarray
    emerging_neighbor: np.ndarray
    emerging_unrelated: np.ndarray


@dataclass(frozen=True)
class SubgraphSet:
    Mt: Tensor
    Bt: Tensor
    Bhat_t: Tensor
    Nt: Tensor


@dataclass
class GraphEmbeddings:
    M: Tensor
    N: Tensor
    R: Tensor
    W: Tensor


def neighbor_vector(m: np.ndarray, graph: CoGraph, mode: str = "union") -> np.ndarray:
    """Codes not in ``m`` that share an edge with some code in ``m``.

    ``union`` counts an edge in either direction; ``out`` only edges leaving a diagnosis.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (graph.d,):
        raise ValueError(f"mask of shape {m.shape} for d={graph.d}")
    if mode == "union":
        reach = m @ graph.linked
    elif mode == "out":
        reach = m @ graph.out_linked()
    else:
        raise ValueError(f"unknown neighbour mode {mode!r}")
    return ((reach > 0) & (m == 0)).astype(np.float64)


def visit_masks(visit, graph: CoGraph, mode: str = "union") -> VisitMasks:
    m = np.zeros(graph.d)
    m[list(visit)] = 1.0
    return VisitMasks(m, neighbor_vector(m, graph, mode))


def split_roles(m_t: np.ndarray, m_prev: np.ndarray, n_prev: np.ndarray) -> RoleMasks:
    cur, prev, nb = m_t > 0, m_prev > 0, n_prev > 0
    return RoleMasks(
        persistent=(cur & prev).astype(np.float64),
        emerging_neighbor=(cur & nb).astype(np.float64),
        emerging_unrelated=(cur & ~(prev | nb)).astype(np.float64),
    )


def _masked(A: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    return nk.mask_cols(nk.mask_rows(A, rows), cols)


def oracle_subgraphs(m: np.ndarray, n: np.ndarray, A: Tensor) -> SubgraphSet:
    return SubgraphSet(
        Mt=_masked(A, m, m),
        Bt=_masked(A, m, n),
        Bhat_t=_masked(A, n, m),
        Nt=_masked(A, n, n),
    )


def oracle_aggregate(m: np.ndarray, n: np.ndarray, S: SubgraphSet, M: Tensor, N: Tensor) -> tuple[Tensor, Tensor]:
    Z_D = nk.mask_rows(M, m) + S.Mt @ M + S.Bt @ N
    Z_N = nk.mask_rows(N, n) + S.Nt @ N + S.Bhat_t @ M
    return Z_D, Z_N


def aggregate_optimized(
    m: np.ndarray, n: np.ndarray, A: Tensor, M: Tensor, N: Tensor, *, neighbors: bool = True
) -> tuple[Tensor, Tensor | None]:
    """Memory-efficient aggregation; every intermediate is d×s.

    With ``neighbors=False`` only the diagnosis output is computed.
    """
    mM = nk.mask_rows(M, m)
    nN = nk.mask_rows(N, n)
    AmM = A @ mM
    AnN = A @ nN
    Z_D = nk.mask_rows(M + AmM + AnN, m)
    if not neighbors:
        return Z_D, None
    Z_N = nk.mask_rows(N + AnN + AmM, n)
    return Z_D, Z_N


def _hidden(Z: Tensor, W: Tensor) -> Tensor:
    if Z.shape[1] != W.shape[0]:
        raise nk.DimensionError(f"graph layer: Z {Z.shape} vs W {W.shape}")
    return nk.leaky_relu(Z @ W)


def graph_layer(Z_D: Tensor, Z_N: Tensor | None, W: Tensor) -> tuple[Tensor, Tensor | None]:
    return _hidden(Z_D, W), (None if Z_N is None else _hidden(Z_N, W))
