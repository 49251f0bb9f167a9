"""Parameter sets and the end-to-end forward pass for Chet and its ablations.

Variants:

* ``full``: dynamic graph layer, role-based transitions, max pooling, visit attention.
* ``no_dynamic``: one universal embedding aggregated over the static graph
  (no per-visit masking); unrelated-disease queries come from a linear
  projection of that embedding.
* ``no_transition``: diagnosis side of the dynamic graph layer only; a visit
  embedding is the sum of the diagnosed rows of H_D.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from .cograph import CoGraph
from .config import TrainConfig
from .dyngraph import aggregate_optimized, graph_layer, neighbor_vector, split_roles
from .numkernel import Tensor
from .transitions import (
    AttentionParams,
    MGruParams,
    gru_first,
    mgru_step,
    patient_embedding,
    transition_emerging,
    visit_embedding,
)

# parameter name -> group used for reporting gradient checks
GROUPS = {
    "M": "M", "N": "N", "R": "R", "E": "E", "W_proj": "R_proj", "W": "W",
    "W_q": "attention", "W_k": "attention", "W_v": "attention",
    "W_z": "mgru", "W_r": "mgru", "W_h": "mgru",
    "U_z": "mgru", "U_r": "mgru", "U_h": "mgru",
    "b_z": "mgru", "b_r": "mgru", "b_h": "mgru",
    "W_alpha": "W_alpha", "W_c": "classifier", "b_c": "classifier",
}


def param_shapes(variant: str, d: int, out: int, s: int, s_prime: int, a: int, p: int) -> dict[str, tuple[int, int]]:
    if variant == "no_transition":
        return {
            "M": (d, s), "N": (d, s), "W": (s, s_prime),
            "W_alpha": (s_prime, 1), "W_c": (s_prime, out), "b_c": (1, out),
        }
    shapes = {}
    if variant == "full":
        shapes.update({"M": (d, s), "N": (d, s), "R": (d, s_prime)})
    elif variant == "no_dynamic":
        shapes.update({"E": (d, s), "W_proj": (s, s_prime)})
    else:
        raise ValueError(f"unknown variant {variant!r}")
    shapes.update({
        "W": (s, s_prime),
        "W_q": (s_prime, a), "W_k": (s_prime, a), "W_v": (s_prime, p),
        "W_z": (s_prime, p), "W_r": (s_prime, p), "W_h": (s_prime, p),
        "U_z": (p, p), "U_r": (p, p), "U_h": (p, p),
        "b_z": (1, p), "b_r": (1, p), "b_h": (1, p),
        "W_alpha": (p, 1), "W_c": (p, out), "b_c": (1, out),
    })
    return shapes


def _param_rng(seed: int, name: str) -> np.random.Generator:
    # per-name streams keep shared parameters identical across variants
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


@dataclass
class ChetParams:
    variant: str
    tensors: dict[str, Tensor]

    @classmethod
    def init(cls, variant: str, d: int, out: int, cfg: TrainConfig, seed: int | None = None) -> "ChetParams":
        seed = cfg.seed if seed is None else seed
        shapes = param_shapes(variant, d, out, cfg.s, cfg.s_prime, cfg.a, cfg.p)
        tensors = {}
        for name, shape in shapes.items():
            if name.startswith("b_"):
                data = np.zeros(shape)
            else:
                data = nk.uniform_init(_param_rng(seed, name), shape)
            tensors[name] = nk.parameter(data, name)
        return cls(variant, tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def list(self) -> list[Tensor]:
        return list(self.tensors.values())

    def names(self) -> list[str]:
        return list(self.tensors)

    def groups(self) -> dict[str, list[Tensor]]:
        out: dict[str, list[Tensor]] = {}
        for name, t in self.tensors.items():
            out.setdefault(GROUPS[name], []).append(t)
        return out

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.tensors.items()}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        for k, v in arrays.items():
            self.tensors[k].data = np.array(v, dtype=np.float64)

    def attention(self) -> AttentionParams:
        t = self.tensors
        return AttentionParams(t["W_q"], t["W_k"], t["W_v"])

    def gru(self) -> MGruParams:
        t = self.tensors
        return MGruParams(t["W_z"], t["W_r"], t["W_h"], t["U_z"], t["U_r"], t["U_h"], t["b_z"], t["b_r"], t["b_h"])


@dataclass(frozen=True)
class EncodedVisit:
    m: np.ndarray
    n: np.ndarray
    # role masks relative to the previous visit; None for the first visit
    persistent: np.ndarray | None = None
    emerging_neighbor: np.ndarray | None = None
    emerging_unrelated: np.ndarray | None = None


def encode_record(features, graph: CoGraph, neighbor_mode: str = "union") -> list[EncodedVisit]:
    """Diagnosis, neighbour and role masks for every feature visit (graph-dependent, param-free)."""
    out: list[EncodedVisit] = []
    for visit in features:
        m = np.zeros(graph.d)
        m[list(visit)] = 1.0
        n = neighbor_vector(m, graph, neighbor_mode)
        if out:
            prev = out[-1]
            roles = split_roles(m, prev.m, prev.n)
            out.append(EncodedVisit(m, n, roles.persistent, roles.emerging_neighbor, roles.emerging_unrelated))
        else:
            out.append(EncodedVisit(m, n))
    if not out:
        raise ValueError("record has no feature visits")
    return out


@dataclass
class Trace:
    H_D: list[Tensor] = field(default_factory=list)
    h_en: list[Tensor] = field(default_factory=list)
    h_eu: list[Tensor] = field(default_factory=list)
    visit_embs: list[Tensor] = field(default_factory=list)
    alpha: Tensor | None = None


class Chet:
    """Holds the graph constant and runs forward passes for one variant."""

    def __init__(self, graph: CoGraph, params: ChetParams, pool_all: bool = False):
        self.graph = graph
        self.params = params
        self.A = nk.constant(graph.A)
        self.pool_all = pool_all

    @property
    def variant(self) -> str:
        return self.params.variant

    def forward(self, record: list[EncodedVisit], trace: Trace | None = None) -> Tensor:
        if self.variant == "no_transition":
            embs = self._visits_no_transition(record, trace)
        else:
            embs = self._visits_transition(record, trace)
        o, alpha = patient_embedding(embs, self.params["W_alpha"])
        if trace is not None:
            trace.visit_embs = embs
            trace.alpha = alpha
        return o

    def predict(self, record: list[EncodedVisit]) -> Tensor:
        return predict(self.forward(record), self.params["W_c"], self.params["b_c"])

    def _visits_transition(self, record, trace):
        P = self.params
        attn, gru = P.attention(), P.gru()
        if self.variant == "full":
            R = P["R"]
        else:
            E = P["E"]
            H_static = nk.leaky_relu((E + self.A @ E) @ P["W"])
            R = E @ P["W_proj"]
        embs = []
        h = H_N_prev = None
        for t, ev in enumerate(record):
            if self.variant == "full":
                Z_D, Z_N = aggregate_optimized(ev.m, ev.n, self.A, P["M"], P["N"])
                H_D, H_N = graph_layer(Z_D, Z_N, P["W"])
            else:
                H_D = H_N = H_static
            if t == 0:
                h = gru_first(ev.m, H_D, gru)
            else:
                h_en = transition_emerging(H_N_prev, H_D, ev.emerging_neighbor, attn)
                h_eu = transition_emerging(R, H_D, ev.emerging_unrelated, attn)
                h = mgru_step(ev.persistent, H_D, h_en, h_eu, h, gru)
                if trace is not None:
                    trace.h_en.append(h_en)
                    trace.h_eu.append(h_eu)
            if trace is not None:
                trace.H_D.append(H_D)
            H_N_prev = H_N
            embs.append(visit_embedding(h, ev.m, self.pool_all))
        return embs

    def _visits_no_transition(self, record, trace):
        P = self.params
        embs = []
        for ev in record:
            Z_D, _ = aggregate_optimized(ev.m, ev.n, self.A, P["M"], P["N"], neighbors=False)
            H_D, _ = graph_layer(Z_D, None, P["W"])
            if trace is not None:
                trace.H_D.append(H_D)
            embs.append(nk.sum_rows(nk.take_rows(H_D, np.flatnonzero(ev.m))))
        return embs


def predict(o: Tensor, W_c: Tensor, b_c: Tensor) -> Tensor:
    """Sigmoid classifier head: probabilities of shape 1×out."""
    if o.shape[1] != W_c.shape[0] or b_c.shape[1] != W_c.shape[1]:
        raise nk.DimensionError(f"classifier shapes o{o.shape} W{W_c.shape} b{b_c.shape}")
    return nk.sigmoid(o @ W_c + b_c)


def ablate(graph: CoGraph, d: int, out: int, cfg: TrainConfig) -> Chet:
    """Build the model wiring selected by ``cfg.ablation`` with fresh parameters."""
    return Chet(graph, ChetParams.init(cfg.ablation, d, out, cfg), cfg.pool_all)
