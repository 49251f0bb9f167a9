"""EHR data model: code vocabulary, visits, patients, JSONL IO, splits, task labels."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

HEART_FAILURE_PREFIX = "428"
TASKS = ("diagnosis", "heart_failure")


class DataError(ValueError):
    """Malformed or invalid EHR input."""


@dataclass(frozen=True)
class CodeVocab:
    codes: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.codes:
            raise DataError("vocabulary is empty")
        index = {c: i for i, c in enumerate(self.codes)}
        if len(index) != len(self.codes):
            raise DataError("duplicate codes in vocabulary")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def d(self) -> int:
        return len(self.codes)


# A visit is the sorted tuple of its code indices (sparse form of the multi-hot vector).
Visit = tuple


def make_visit(indices: Iterable[int], d: int) -> Visit:
    vis = tuple(sorted(set(int(i) for i in indices)))
    if not vis:
        raise DataError("empty visit")
    if vis[0] < 0 or vis[-1] >= d:
        raise DataError(f"code index out of range [0, {d})")
    return vis


def multi_hot(visit: Visit, d: int) -> np.ndarray:
    v = np.zeros(d)
    v[list(visit)] = 1.0
    return v


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    visits: tuple[Visit, ...]

    def __post_init__(self):
        if len(self.visits) < 2:
            raise DataError(f"patient {self.patient_id!r} has fewer than 2 visits")


@dataclass(frozen=True)
class Dataset:
    vocab: CodeVocab
    patients: tuple[PatientRecord, ...]

    def __post_init__(self):
        d = self.vocab.d
        for p in self.patients:
            for v in p.visits:
                if not v or v[0] < 0 or v[-1] >= d:
                    raise DataError(f"patient {p.patient_id!r} has an invalid visit")

    def __len__(self) -> int:
        return len(self.patients)

    def subset(self, patients: Sequence[PatientRecord]) -> "Dataset":
        return Dataset(self.vocab, tuple(patients))


@dataclass(frozen=True)
class LabeledExample:
    patient_id: str
    features: tuple[Visit, ...]
    label: np.ndarray  # multi-hot (diagnosis) or shape-(1,) 0/1 (heart failure)
    label_codes: tuple[int, ...] = ()


def from_code_lists(records: Sequence[tuple[str, Sequence[Sequence[str]]]]) -> tuple[Dataset, int]:
    """Build a dataset from (patient_id, [[code, ...], ...]) pairs.

    The vocabulary is the union of all codes in first-appearance order,
    including patients later rejected for having fewer than two visits.
    Returns the dataset and the number of rejected patients.
    """
    order: dict[str, int] = {}
    for pid, visits in records:
        for vis in visits:
            if len(vis) == 0:
                raise DataError(f"patient {pid!r} has an empty visit")
            for code in vis:
                order.setdefault(str(code), len(order))
    if not order:
        raise DataError("no codes found")
    vocab = CodeVocab(tuple(order))
    patients, rejected = [], 0
    for pid, visits in records:
        if len(visits) < 2:
            rejected += 1
            continue
        patients.append(
            PatientRecord(pid, tuple(make_visit((order[str(c)] for c in v), vocab.d) for v in visits))
        )
    if not patients:
        raise DataError("no patient has at least two visits")
    return Dataset(vocab, tuple(patients)), rejected


def load_dataset(path: str | Path) -> tuple[Dataset, int]:
    """Read the JSONL format: one ``{"patient_id": ..., "visits": [[code, ...], ...]}`` per line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pid = str(obj["patient_id"])
                visits = obj["visits"]
                if not isinstance(visits, list) or not all(isinstance(v, list) for v in visits):
                    raise TypeError("visits must be a list of lists")
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            records.append((pid, visits))
    ds, rejected = from_code_lists(records)
    if rejected:
        log.warning("skipped %d patient(s) with fewer than 2 visits", rejected)
    return ds, rejected


def dump_dataset(ds: Dataset, path: str | Path) -> None:
    codes = ds.vocab.codes
    with open(path, "w", encoding="utf-8") as fh:
        for p in ds.patients:
            obj = {"patient_id": p.patient_id, "visits": [[codes[i] for i in v] for v in p.visits]}
            fh.write(json.dumps(obj) + "\n")


def split_dataset(ds: Dataset, counts: tuple[int, int, int], seed: int) -> tuple[Dataset, Dataset, Dataset]:
    n_train, n_val, n_test = counts
    if min(counts) < 0 or sum(counts) > len(ds):
        raise DataError(f"split {counts} needs more than {len(ds)} patients")
    order = np.random.default_rng(seed).permutation(len(ds))
    pick = [ds.patients[i] for i in order]
    return (
        ds.subset(pick[:n_train]),
        ds.subset(pick[n_train:n_train + n_val]),
        ds.subset(pick[n_train + n_val:n_train + n_val + n_test]),
    )


def is_heart_failure(visit: Visit, vocab: CodeVocab) -> bool:
    return any(vocab.codes[i].startswith(HEART_FAILURE_PREFIX) for i in visit)


def make_examples(ds: Dataset, task: str) -> list[LabeledExample]:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    d = ds.vocab.d
    out = []
    for p in ds.patients:
        last = p.visits[-1]
        if task == "diagnosis":
            label = multi_hot(last, d)
        else:
            label = np.array([float(is_heart_failure(last, ds.vocab))])
        out.append(LabeledExample(p.patient_id, p.visits[:-1], label, last))
    return out


def feature_visits(ds: Dataset) -> list[tuple[Visit, ...]]:
    return [p.visits[:-1] for p in ds.patients]


def remap(ds: Dataset, vocab: CodeVocab) -> tuple[Dataset, int]:
    """Re-index ``ds`` onto another vocabulary by code string.

    Codes unknown to ``vocab`` are dropped, then visits left empty, then
    patients left with fewer than two visits. Returns the dataset and the
    number of dropped code occurrences.
    """
    dropped = 0
    patients = []
    for p in ds.patients:
        visits = []
        for v in p.visits:
            idx = [vocab.index[ds.vocab.codes[i]] for i in v if ds.vocab.codes[i] in vocab.index]
            dropped += len(v) - len(idx)
            if idx:
                visits.append(make_visit(idx, vocab.d))
        if len(visits) >= 2:
            patients.append(PatientRecord(p.patient_id, tuple(visits)))
    if not patients:
        raise DataError("no patient survives re-indexing onto the model vocabulary")
    return Dataset(vocab, tuple(patients)), dropped
