"""Evaluation metrics for diagnosis (multi-label) and heart-failure (binary) prediction."""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

log = logging.getLogger(__name__)


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    return arr.reshape(1, -1) if arr.ndim == 1 else arr


def weighted_f1(probs, labels, threshold: float = 0.5) -> float:
    """Per-code F1 at ``threshold``, averaged with ground-truth support weights."""
    P = _as_matrix(probs)
    Y = _as_matrix(labels) > 0.5
    pred = P >= threshold
    tp = (pred & Y).sum(axis=0)
    fp = (pred & ~Y).sum(axis=0)
    fn = (~pred & Y).sum(axis=0)
    support = Y.sum(axis=0)
    total = support.sum()
    if total == 0:
        raise ValueError("no positive labels; weighted F1 undefined")
    keep = support > 0
    f1 = 2 * tp[keep] / (2 * tp[keep] + fp[keep] + fn[keep])
    return float((f1 * support[keep]).sum() / total)


def f1_binary(scores, labels, threshold: float = 0.5) -> float:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1) > 0.5
    pred = s >= threshold
    tp = int((pred & y).sum())
    denom = 2 * tp + int((pred & ~y).sum()) + int((~pred & y).sum())
    return 0.0 if denom == 0 else 2 * tp / denom


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k highest scores; ties go to the lower code index."""
    return np.argsort(-np.asarray(scores), kind="stable")[:k]


def recall_at_k(probs, label_sets: Sequence[Sequence[int]], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    P = _as_matrix(probs)
    vals = []
    for scores, labels in zip(P, label_sets):
        labels = set(labels)
        if not labels:
            log.warning("skipping example with no labels")
            continue
        hits = len(labels.intersection(top_k(scores, k).tolist()))
        vals.append(hits / len(labels))
    return float(np.mean(vals)) if vals else 0.0


def recall_split(probs, label_sets, prev_visits, k: int) -> tuple[float, float]:
    """R@k split into labels present in the last feature visit and new ones.

    Both parts use the full label count as denominator, so they add up to R@k.
    """
    P = _as_matrix(probs)
    pers, emer = [], []
    for scores, labels, prev in zip(P, label_sets, prev_visits):
        labels = set(labels)
        if not labels:
            continue
        hits = set(top_k(scores, k).tolist()) & labels
        prev = set(prev)
        pers.append(len(hits & prev) / len(labels))
        emer.append(len(hits - prev) / len(labels))
    if not pers:
        return 0.0, 0.0
    return float(np.mean(pers)), float(np.mean(emer))


def auc_roc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC; tied scores count one half."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1) > 0.5
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
