"""Global disease co-occurrence graph with thresholded row-normalised weights."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DELTA = 0.01


@dataclass(frozen=True)
class CoGraph:
    A: np.ndarray
    delta: float
    # symmetric 0/1 support of A, used for neighbour lookups
    linked: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "linked", ((A > 0) | (A.T > 0)).astype(np.float64))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def out_linked(self) -> np.ndarray:
        return (self.A > 0).astype(np.float64)


def count_cooccurrence(visit_seqs: Iterable[Sequence[Sequence[int]]], d: int) -> np.ndarray:
    """Symmetric pair counts: each unordered pair adds 1 to f_ij and f_ji per visit."""
    f = np.zeros((d, d), dtype=np.int64)
    for seq in visit_seqs:
        for visit in seq:
            for i, j in combinations(sorted(set(visit)), 2):
                f[i, j] += 1
                f[j, i] += 1
    return f


def build_adjacency(f: np.ndarray, delta: float = DEFAULT_DELTA) -> CoGraph:
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    f = np.asarray(f, dtype=np.float64).copy()
    np.fill_diagonal(f, 0.0)
    totals = f.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(totals > 0, f / totals, 0.0)
    qualified = (ratio >= delta) & (f > 0)
    kept = np.where(qualified, f, 0.0)
    q = kept.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        A = np.where(q > 0, kept / q, 0.0)
    return CoGraph(A, delta)


def build_graph(visit_seqs, d: int, delta: float = DEFAULT_DELTA) -> CoGraph:
    return build_adjacency(count_cooccurrence(visit_seqs, d), delta)


def export_csv(graph: CoGraph, path: str | Path, codes: Sequence[str] | None = None) -> None:
    rows, cols = np.nonzero(graph.A)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "weight"])
        for i, j in zip(rows, cols):
            a, b = (codes[i], codes[j]) if codes is not None else (int(i), int(j))
            w.writerow([a, b, repr(float(graph.A[i, j]))])
