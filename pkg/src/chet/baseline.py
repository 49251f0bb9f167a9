"""History-plus-frequency reference scorer for the diagnosis task."""
from __future__ import annotations

import numpy as np

from .ehrdata import Dataset

HISTORY_MARGIN = 0.5


class FrequencyBaseline:
    """Scores codes by training frequency, lifting codes from the patient's own history.

    Non-history codes score in [0, 0.5); history codes in [0.5, 1.0), so any
    history code outranks every other code.
    """

    def __init__(self, train: Dataset):
        if not len(train):
            raise ValueError("empty training set")
        d = train.vocab.d
        counts = np.zeros(d)
        for p in train.patients:
            for v in p.visits:
                counts[list(v)] += 1
        # strictly below 1 so the history margin dominates
        self.freq = counts / (counts.max() + 1.0)
        self.d = d

    def score(self, features) -> np.ndarray:
        s = (1.0 - HISTORY_MARGIN) * self.freq
        history = sorted({c for v in features for c in v})
        s[history] += HISTORY_MARGIN
        return s

    def score_many(self, feature_lists) -> np.ndarray:
        return np.vstack([self.score(f) for f in feature_lists])
