"""Training loop, evaluation and report assembly."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import numkernel as nk
from .baseline import FrequencyBaseline
from .cograph import CoGraph, build_graph
from .config import TrainConfig, config_hash, to_dict
from .ehrdata import Dataset, feature_visits, make_examples, split_dataset
from .metrics import auc_roc, f1_binary, recall_at_k, recall_split, weighted_f1
from .model import Chet, ChetParams, EncodedVisit, encode_record

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, last_finite_loss: float | None):
        super().__init__(f"non-finite loss at epoch {epoch}; last finite loss {last_finite_loss}")
        self.epoch = epoch
        self.last_finite_loss = last_finite_loss


@dataclass
class Prepared:
    records: list[list[EncodedVisit]]
    labels: np.ndarray  # n × out
    label_codes: list[tuple[int, ...]]
    last_visits: list[tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.records)


def prepare(ds: Dataset, graph: CoGraph, cfg: TrainConfig) -> Prepared:
    examples = make_examples(ds, cfg.task)
    return Prepared(
        records=[encode_record(ex.features, graph, cfg.neighbor_mode) for ex in examples],
        labels=np.vstack([ex.label for ex in examples]) if examples else np.zeros((0, 1)),
        label_codes=[ex.label_codes for ex in examples],
        last_visits=[ex.features[-1] for ex in examples],
    )


def output_size(ds: Dataset, task: str) -> int:
    return ds.vocab.d if task == "diagnosis" else 1


def example_loss(model: Chet, record, label: np.ndarray) -> nk.Tensor:
    return nk.bce(model.predict(record), label)


def predict_all(model: Chet, data: Prepared) -> np.ndarray:
    if not len(data):
        return np.zeros((0, data.labels.shape[1]))
    return np.vstack([model.predict(r).data for r in data.records])


def metrics_for(probs: np.ndarray, data: Prepared, cfg: TrainConfig) -> dict[str, Any]:
    if cfg.task == "diagnosis":
        return {
            "w_f1": weighted_f1(probs, data.labels, cfg.threshold),
            "r_at": {str(k): recall_at_k(probs, data.label_codes, k) for k in cfg.k_values},
        }
    y = data.labels[:, 0]
    out: dict[str, Any] = {"f1": f1_binary(probs[:, 0], y, cfg.threshold)}
    out["auc"] = auc_roc(probs[:, 0], y) if 0 < y.sum() < len(y) else None
    return out


def split_metrics(probs: np.ndarray, data: Prepared, cfg: TrainConfig) -> dict[str, dict[str, float]]:
    pers, emer = {}, {}
    for k in cfg.k_values:
        pers[str(k)], emer[str(k)] = recall_split(probs, data.label_codes, data.last_visits, k)
    return {"persistent": {"r_at": pers}, "emerging": {"r_at": emer}}


def selection_score(probs: np.ndarray, data: Prepared, cfg: TrainConfig, loss: float) -> float:
    """Validation score for best-epoch selection (higher is better)."""
    if cfg.select_metric == "loss":
        return -loss
    if cfg.select_metric == "recall" and cfg.task == "diagnosis":
        return recall_at_k(probs, data.label_codes, cfg.k_values[0])
    if cfg.task == "diagnosis":
        if data.labels.sum() == 0:
            return -loss
        return weighted_f1(probs, data.labels, cfg.threshold)
    y = data.labels[:, 0]
    if 0 < y.sum() < len(y):
        return auc_roc(probs[:, 0], y)
    return -loss


def mean_bce(probs: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(probs, 1e-12, 1 - 1e-12)
    return float(-(labels * np.log(p) + (1 - labels) * np.log1p(-p)).mean())


@dataclass
class TrainResult:
    model: Chet
    history: list[dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0


def train(train_data: Prepared, val_data: Prepared, graph: CoGraph, d: int, out: int, cfg: TrainConfig) -> TrainResult:
    if not len(train_data):
        raise ValueError("empty training set")
    model = Chet(graph, ChetParams.init(cfg.ablation, d, out, cfg), cfg.pool_all)
    params = model.params.list()
    state = nk.AdamState(lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(model)
    best_score, best_snapshot = -math.inf, model.params.snapshot()
    last_finite = None
    n = len(train_data)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            acc = [np.zeros_like(p.data) for p in params]
            for i in batch:
                try:
                    with nk.GradTape() as tape:
                        loss = example_loss(model, train_data.records[i], train_data.labels[i])
                except nk.NonFiniteError:
                    raise TrainingDiverged(epoch, last_finite) from None
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(epoch, last_finite)
                total += value
                for a, g in zip(acc, tape.gradient(loss, params)):
                    a += g
            scale = 1.0 / len(batch)
            nk.adam_step(state, params, [a * scale for a in acc])
        train_loss = total / n
        last_finite = train_loss
        entry = {"epoch": epoch, "train_loss": train_loss}
        if len(val_data):
            probs = predict_all(model, val_data)
            val_loss = mean_bce(probs, val_data.labels)
            entry["val_loss"] = val_loss
            entry["val_score"] = selection_score(probs, val_data, cfg, val_loss)
        else:
            entry["val_score"] = -train_loss
        result.history.append(entry)
        log.info("epoch %d train_loss %.5f val_score %.5f", epoch, train_loss, entry["val_score"])
        if entry["val_score"] >= best_score:
            best_score = entry["val_score"]
            best_snapshot = model.params.snapshot()
            result.best_epoch = epoch
    model.params.load(best_snapshot)
    return result


def default_split(n: int) -> tuple[int, int, int]:
    n_val = n // 10
    n_test = n // 10
    return n - n_val - n_test, n_val, n_test


@dataclass
class Experiment:
    """Everything produced by one split/graph/train/evaluate run."""

    cfg: TrainConfig
    graph: CoGraph
    result: TrainResult
    report: dict[str, Any]
    train_ds: Dataset
    test_ds: Dataset


def build_report(model: Chet, data: Prepared, cfg: TrainConfig, variant: str | None = None) -> dict[str, Any]:
    probs = predict_all(model, data)
    report: dict[str, Any] = {
        "task": cfg.task,
        "seed": cfg.seed,
        "variant": variant or cfg.ablation,
        "config": to_dict(cfg),
        "config_hash": config_hash(cfg),
        "n_examples": len(data),
        "metrics": metrics_for(probs, data, cfg),
    }
    if cfg.task == "diagnosis":
        report["split"] = split_metrics(probs, data, cfg)
    return report


def baseline_report(train_ds: Dataset, data_ds: Dataset, cfg: TrainConfig) -> dict[str, Any]:
    scorer = FrequencyBaseline(train_ds)
    examples = make_examples(data_ds, "diagnosis")
    probs = scorer.score_many([ex.features for ex in examples])
    data = Prepared([], np.vstack([ex.label for ex in examples]),
                    [ex.label_codes for ex in examples], [ex.features[-1] for ex in examples])
    return {
        "task": "diagnosis",
        "seed": cfg.seed,
        "variant": "frequency_baseline",
        "metrics": metrics_for(probs, data, cfg),
        "split": split_metrics(probs, data, cfg),
    }


def run_experiment(ds: Dataset, cfg: TrainConfig) -> Experiment:
    counts = cfg.split or default_split(len(ds))
    train_ds, val_ds, test_ds = split_dataset(ds, counts, cfg.split_seed)
    graph = build_graph(feature_visits(train_ds), ds.vocab.d, cfg.delta)
    out = output_size(ds, cfg.task)
    result = train(prepare(train_ds, graph, cfg), prepare(val_ds, graph, cfg), graph, ds.vocab.d, out, cfg)
    report = build_report(result.model, prepare(test_ds, graph, cfg), cfg)
    report["history"] = result.history
    report["best_epoch"] = result.best_epoch
    return Experiment(cfg, graph, result, report, train_ds, test_ds)
