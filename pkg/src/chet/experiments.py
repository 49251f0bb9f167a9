"""Multi-seed ablation runs on one planted dataset, shared by scripts and acceptance tests."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, from_dict, load_run_config, train_config
from .ehrdata import Dataset, split_dataset
from .synthgen import SynthConfig, generate
from .train import baseline_report, default_split, run_experiment

log = logging.getLogger(__name__)


@dataclass
class SeedRun:
    variant: str
    seed: int
    r10: float
    emerging_r10: float
    best_epoch: int
    seconds: float


@dataclass
class Study:
    baseline_r10: float
    baseline_emerging_r10: float
    runs: list[SeedRun] = field(default_factory=list)

    def of(self, variant: str) -> list[SeedRun]:
        return [r for r in self.runs if r.variant == variant]

    def median(self, variant: str, attr: str = "r10") -> float:
        return float(np.median([getattr(r, attr) for r in self.of(variant)]))


def planted_dataset(rc: RunConfig) -> Dataset:
    return generate(from_dict(SynthConfig, rc.synth))


def ablation_study(
    rc: RunConfig | str | Path,
    seeds=range(5),
    variants=("full", "no_transition", "no_dynamic"),
    **train_overrides,
) -> Study:
    """Train every variant for every seed on the same split and compare with the frequency baseline."""
    if not isinstance(rc, RunConfig):
        rc = load_run_config(rc)
    ds = planted_dataset(rc)
    base_cfg = train_config(rc.preset, **{**rc.train, **train_overrides})
    counts = base_cfg.split or default_split(len(ds))
    train_ds, _, test_ds = split_dataset(ds, counts, base_cfg.split_seed)
    base = baseline_report(train_ds, test_ds, base_cfg)
    study = Study(base["metrics"]["r_at"]["10"], base["split"]["emerging"]["r_at"]["10"])
    for variant in variants:
        for seed in seeds:
            cfg = train_config(rc.preset, **{**rc.train, **train_overrides, "ablation": variant, "seed": seed})
            t0 = time.perf_counter()
            rep = run_experiment(ds, cfg).report
            run = SeedRun(variant, seed, rep["metrics"]["r_at"]["10"], rep["split"]["emerging"]["r_at"]["10"],
                          rep["best_epoch"], time.perf_counter() - t0)
            log.info("%s seed %d: R@10 %.4f emerging %.4f", variant, seed, run.r10, run.emerging_r10)
            study.runs.append(run)
    return study
