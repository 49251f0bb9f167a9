"""Seeded synthetic EHR with planted disease clusters and transition dynamics.

Codes are split into equal contiguous clusters. Each patient has one or two
home clusters. The first visit draws codes from the home clusters (with
probability ``within_cluster``) or uniformly. Each later visit keeps every
previous code with probability ``carryover``; each previous code also makes
one of its absent cluster-mates emerge with probability ``emergence``; and
``noise`` controls a few uniformly drawn codes per visit.

Codes that were new in the previous visit can use their own rates
(``carryover_emerging``, and ``emergence`` versus ``emergence_persistent``
for codes that were already persistent). Both default to the shared rates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ehrdata import Dataset, from_code_lists


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_patients: int = 500
    d: int = 100
    n_clusters: int = 5
    max_visits: int = 5
    codes_per_visit: float = 13.0
    within_cluster: float = 0.9
    carryover: float = 0.5
    # carryover for codes that were new in the previous visit; None means ``carryover``
    carryover_emerging: float | None = None
    emergence: float = 0.5
    # emergence driven by codes already persistent in the previous visit; None means ``emergence``
    emergence_persistent: float | None = None
    noise: float = 0.05
    max_home_clusters: int = 2
    seed: int = 0

    def __post_init__(self):
        for name in ("within_cluster", "carryover", "carryover_emerging", "emergence", "emergence_persistent", "noise"):
            v = getattr(self, name)
            if v is None:
                continue
            if not 0.0 <= v <= 1.0:
                raise SynthConfigError(f"{name} must be in [0, 1], got {v}")
        if self.d < 1 or self.n_patients < 1:
            raise SynthConfigError("d and n_patients must be positive")
        if not 1 <= self.n_clusters <= self.d:
            raise SynthConfigError("need 1 <= n_clusters <= d")
        if self.max_visits < 2:
            raise SynthConfigError("max_visits must be >= 2")
        if not 1 <= self.max_home_clusters <= self.n_clusters:
            raise SynthConfigError("max_home_clusters must be in [1, n_clusters]")
        if not 1.0 <= self.codes_per_visit <= self.d:
            raise SynthConfigError("codes_per_visit must be in [1, d]")
        if self.codes_per_visit > self.d // self.n_clusters:
            raise SynthConfigError(
                f"codes_per_visit {self.codes_per_visit} exceeds cluster size {self.d // self.n_clusters}"
            )


def code_name(i: int) -> str:
    """ICD-9-like code string; indices 80..89 map to 428.x (heart failure)."""
    return f"{420 + i // 10:03d}.{i % 10}"


def cluster_of(cfg: SynthConfig) -> np.ndarray:
    size = cfg.d // cfg.n_clusters
    return np.minimum(np.arange(cfg.d) // size, cfg.n_clusters - 1)


def _first_visit(rng, cfg, home_codes: np.ndarray) -> set[int]:
    k = int(np.clip(rng.poisson(cfg.codes_per_visit), 1, len(home_codes)))
    codes: set[int] = set()
    while len(codes) < k:
        if rng.random() < cfg.within_cluster:
            codes.add(int(rng.choice(home_codes)))
        else:
            codes.add(int(rng.integers(cfg.d)))
    return codes


def _next_visit(rng, cfg, prev: set[int], before: set[int], members, cluster) -> set[int]:
    ordered = sorted(prev)
    fresh = cfg.carryover if cfg.carryover_emerging is None else cfg.carryover_emerging
    nxt = {c for c in ordered if rng.random() < (cfg.carryover if c in before else fresh)}
    spawn_old = cfg.emergence if cfg.emergence_persistent is None else cfg.emergence_persistent
    for c in ordered:
        if rng.random() < (spawn_old if c in before else cfg.emergence):
            mates = [m for m in members[cluster[c]] if m not in prev and m not in nxt]
            if mates:
                nxt.add(int(rng.choice(mates)))
    n_noise = rng.binomial(int(round(cfg.codes_per_visit)), cfg.noise)
    for _ in range(n_noise):
        nxt.add(int(rng.integers(cfg.d)))
    if not nxt:
        nxt.add(ordered[int(rng.integers(len(ordered)))])
    return nxt


def generate(cfg: SynthConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    cluster = cluster_of(cfg)
    members = [np.flatnonzero(cluster == k) for k in range(cfg.n_clusters)]
    names = [code_name(i) for i in range(cfg.d)]
    records = []
    for u in range(cfg.n_patients):
        n_home = int(rng.integers(1, cfg.max_home_clusters + 1))
        home = rng.choice(cfg.n_clusters, size=n_home, replace=False)
        home_codes = np.concatenate([members[h] for h in home])
        T = int(rng.integers(2, cfg.max_visits + 1))
        visits = [_first_visit(rng, cfg, home_codes)]
        for t in range(T - 1):
            before = visits[t - 1] if t > 0 else set()
            visits.append(_next_visit(rng, cfg, visits[t], before, members, cluster))
        records.append((f"P{u:05d}", [[names[c] for c in sorted(v)] for v in visits]))
    ds, _ = from_code_lists(records)
    return ds


def describe(ds: Dataset) -> dict[str, float]:
    if not len(ds):
        raise ValueError("empty dataset")
    n_visits = [len(p.visits) for p in ds.patients]
    sizes = [len(v) for p in ds.patients for v in p.visits]
    return {
        "patients": len(ds),
        "max_visits": max(n_visits),
        "avg_visits": float(np.mean(n_visits)),
        "codes": ds.vocab.d,
        "max_codes_per_visit": max(sizes),
        "avg_codes_per_visit": float(np.mean(sizes)),
    }
