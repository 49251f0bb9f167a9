import json

import numpy as np
import pytest

from chet.ehrdata import from_code_lists

# two patients, four visits holding 2, 3, 1 and 1 codes
TOY = [
    ("p1", [["c1", "c2"], ["c1", "c2", "c3"]]),
    ("p2", [["c4"], ["c3"]]),
]

# four feature visits used for the co-occurrence worked example (indices for c1..c4)
WORKED_VISITS = [[(0, 1), (0, 1, 2)], [(1, 2), (2,)]]


@pytest.fixture
def toy_ds():
    ds, rejected = from_code_lists(TOY)
    assert rejected == 0
    return ds


@pytest.fixture
def write_jsonl(tmp_path):
    def write(records, name="data.jsonl"):
        path = tmp_path / name
        with open(path, "w") as fh:
            for pid, visits in records:
                fh.write(json.dumps({"patient_id": pid, "visits": visits}) + "\n")
        return path

    return write


def random_visit_seqs(rng, d, n_patients=20, max_visits=4, max_codes=5):
    seqs = []
    for _ in range(n_patients):
        seq = []
        for _ in range(int(rng.integers(1, max_visits + 1))):
            k = int(rng.integers(1, min(d, max_codes) + 1))
            seq.append(tuple(sorted(rng.choice(d, size=k, replace=False).tolist())))
        seqs.append(seq)
    return seqs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
