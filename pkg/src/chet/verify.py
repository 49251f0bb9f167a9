"""Equivalence checks between the dense subgraph route and the optimized aggregation,
plus the memory/time benchmark behind ``chet bench``."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from .cograph import CoGraph, build_adjacency
from .dyngraph import aggregate_optimized, neighbor_vector, oracle_aggregate, oracle_subgraphs

TOLERANCE = 1e-10


@dataclass
class Instance:
    seed: int
    graph: CoGraph
    m: np.ndarray
    n: np.ndarray
    M: np.ndarray
    N: np.ndarray


def random_instance(seed: int, max_d: int, s: int | None = None) -> Instance:
    """Random co-occurrence graph, diagnosis set, its neighbours and embeddings."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, max(2, max_d) + 1))
    s = int(rng.integers(1, 9)) if s is None else s
    upper = np.triu(rng.poisson(rng.uniform(0.2, 2.0), size=(d, d)).astype(np.float64), 1)
    graph = build_adjacency(upper + upper.T)
    m = np.zeros(d)
    m[rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False)] = 1.0
    n = neighbor_vector(m, graph)
    return Instance(seed, graph, m, n, rng.normal(size=(d, s)), rng.normal(size=(d, s)))


def definitional_subgraphs(A: np.ndarray, m: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, ...]:
    """Subgraph adjacencies built edge by edge from node roles (Mt, Bt, Bhat_t, Nt)."""
    d = A.shape[0]
    out = [np.zeros((d, d)) for _ in range(4)]
    for i, j in zip(*np.nonzero(A)):
        src = "m" if m[i] else "n" if n[i] else None
        dst = "m" if m[j] else "n" if n[j] else None
        slot = {("m", "m"): 0, ("m", "n"): 1, ("n", "m"): 2, ("n", "n"): 3}.get((src, dst))
        if slot is not None:
            out[slot][i, j] = A[i, j]
    return tuple(out)


@dataclass
class VerifyReport:
    trials: int
    max_subgraph_dev: float = 0.0
    max_aggregate_dev: float = 0.0
    dense_allocs: int = 0
    failures: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)), initial=0.0))


def verify(trials: int, max_d: int, seed: int = 0, fault: bool = False) -> VerifyReport:
    """Run both equivalence suites; ``fault`` perturbs one A entry on the optimized side."""
    rep = VerifyReport(trials)
    for t in range(trials):
        inst = random_instance(seed * 1_000_003 + t, max_d)
        A = nk.constant(inst.graph.A)
        S = oracle_subgraphs(inst.m, inst.n, A)
        ref = definitional_subgraphs(inst.graph.A, inst.m, inst.n)
        dev1 = max(float(np.max(np.abs(got.data - want))) for got, want in zip((S.Mt, S.Bt, S.Bhat_t, S.Nt), ref))

        M, N = nk.constant(inst.M), nk.constant(inst.N)
        zd, zn = oracle_aggregate(inst.m, inst.n, S, M, N)
        A_opt = inst.graph.A.copy()
        if fault and t == 0:
            i = int(np.flatnonzero(inst.m)[0])
            A_opt[i, i] += 0.5
        d, s = inst.M.shape
        with nk.track_allocations() as tr:
            od, on = aggregate_optimized(inst.m, inst.n, nk.constant(A_opt), M, N)
        dense = tr.count_at_least(d, d) if d > s else 0
        dev2 = max(_rel_dev(od.data, zd.data), _rel_dev(on.data, zn.data))

        rep.max_subgraph_dev = max(rep.max_subgraph_dev, dev1)
        rep.max_aggregate_dev = max(rep.max_aggregate_dev, dev2)
        rep.dense_allocs += dense
        if dev1 != 0.0 or dev2 > TOLERANCE or dense:
            rep.failures.append(inst.seed)
    return rep


BENCH_HEADER = ("d", "s", "naive_bytes", "optimized_bytes", "naive_ms", "optimized_ms")


def bench_row(d: int, s: int = 16, seed: int = 0, repeats: int = 3) -> dict[str, float]:
    """Peak intermediate bytes and best-of-``repeats`` wall time of both aggregation routes."""
    if d < s:
        raise ValueError(f"d={d} must be >= s={s}")
    rng = np.random.default_rng([seed, d])
    upper = np.triu(rng.poisson(0.3, size=(d, d)).astype(np.float64), 1)
    graph = build_adjacency(upper + upper.T)
    m = np.zeros(d)
    m[rng.choice(d, size=max(1, d // 10), replace=False)] = 1.0
    n = neighbor_vector(m, graph)
    A = nk.constant(graph.A)
    M, N = nk.constant(rng.normal(size=(d, s))), nk.constant(rng.normal(size=(d, s)))

    def naive():
        return oracle_aggregate(m, n, oracle_subgraphs(m, n, A), M, N)

    def optimized():
        return aggregate_optimized(m, n, A, M, N)

    row: dict[str, float] = {"d": d, "s": s}
    for name, fn in (("naive", naive), ("optimized", optimized)):
        with nk.track_allocations() as tr:
            fn()
        row[f"{name}_bytes"] = tr.peak_bytes
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        row[f"{name}_ms"] = round(1000 * best, 4)
    return row
