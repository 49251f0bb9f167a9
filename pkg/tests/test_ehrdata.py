import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chet.ehrdata import (
    CodeVocab,
    DataError,
    Dataset,
    PatientRecord,
    dump_dataset,
    from_code_lists,
    is_heart_failure,
    load_dataset,
    make_examples,
    remap,
    split_dataset,
)


def test_load_two_patients(write_jsonl):
    ds, rejected = load_dataset(write_jsonl([("a", [["c1", "c2"], ["c3"]]), ("b", [["c4"], ["c1"]])]))
    assert ds.vocab.d == 4 and len(ds) == 2 and rejected == 0
    assert ds.vocab.codes == ("c1", "c2", "c3", "c4")


def test_empty_visit_names_patient(write_jsonl):
    with pytest.raises(DataError, match="bad"):
        load_dataset(write_jsonl([("ok", [["c1"], ["c2"]]), ("bad", [["c1"], []])]))


def test_single_visit_patient_is_rejected(write_jsonl, caplog):
    ds, rejected = load_dataset(write_jsonl([("a", [["c1"], ["c2"]]), ("b", [["c3"]])]))
    assert rejected == 1 and len(ds) == 1
    assert "fewer than 2 visits" in caplog.text


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"patient_id": "a", "visits": [["c1"], ["c2"]]}\n{not json\n')
    with pytest.raises(DataError, match=":2:"):
        load_dataset(path)


def test_no_usable_patients(write_jsonl):
    with pytest.raises(DataError):
        load_dataset(write_jsonl([("a", [["c1"]])]))


def test_vocab_rejects_duplicates():
    with pytest.raises(DataError):
        CodeVocab(("a", "a"))


def test_round_trip(tmp_path, toy_ds):
    path = tmp_path / "rt.jsonl"
    dump_dataset(toy_ds, path)
    back, _ = load_dataset(path)
    assert back == toy_ds


def _ten():
    ds, _ = from_code_lists([(f"p{i}", [[f"c{i}"], [f"c{i + 1}"]]) for i in range(10)])
    return ds


def test_split_deterministic_and_disjoint():
    ds = _ten()
    a = split_dataset(ds, (6, 2, 2), seed=3)
    b = split_dataset(ds, (6, 2, 2), seed=3)
    assert a == b
    ids = [p.patient_id for part in a for p in part.patients]
    assert sorted(ids) == sorted(p.patient_id for p in ds.patients)
    assert all(part.vocab is ds.vocab for part in a)


def test_split_degenerate_and_too_large():
    ds = _ten()
    tr, va, te = split_dataset(ds, (10, 0, 0), seed=0)
    assert len(tr) == 10 and len(va) == len(te) == 0
    with pytest.raises(DataError):
        split_dataset(ds, (8, 2, 1), seed=0)


def test_split_seeds_differ():
    ds = _ten()
    orders = {tuple(p.patient_id for p in split_dataset(ds, (10, 0, 0), seed=s)[0].patients) for s in range(10)}
    assert len(orders) > 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 4), st.integers(0, 3))
def test_split_partition_property(seed, n_val, n_test):
    ds = _ten()
    tr, va, te = split_dataset(ds, (10 - n_val - n_test, n_val, n_test), seed)
    sets = [{p.patient_id for p in part.patients} for part in (tr, va, te)]
    assert sum(map(len, sets)) == 10
    assert len(sets[0] | sets[1] | sets[2]) == 10


def test_examples_diagnosis():
    ds, _ = from_code_lists([("a", [["c1"], ["c2"]])])
    (ex,) = make_examples(ds, "diagnosis")
    assert ex.features == ((0,),)
    np.testing.assert_array_equal(ex.label, [0.0, 1.0])
    assert ex.label_codes == (1,)


def test_heart_failure_prefix():
    ds, _ = from_code_lists([("a", [["401.9"], ["428.1", "250.0"]]), ("b", [["428.1"], ["401.9"]])])
    labels = [ex.label[0] for ex in make_examples(ds, "heart_failure")]
    assert labels == [1.0, 0.0]
    assert is_heart_failure((1,), ds.vocab)
    assert not is_heart_failure((0,), ds.vocab)


def test_features_never_include_label_visit(toy_ds):
    for p, ex in zip(toy_ds.patients, make_examples(toy_ds, "diagnosis")):
        assert len(ex.features) == len(p.visits) - 1
        assert ex.features == p.visits[:-1]


def test_patient_needs_two_visits():
    with pytest.raises(DataError):
        PatientRecord("x", ((0,),))


def test_dataset_rejects_out_of_range():
    with pytest.raises(DataError):
        Dataset(CodeVocab(("a",)), (PatientRecord("x", ((0,), (1,))),))


def test_remap_by_code_string():
    src, _ = from_code_lists([("a", [["x", "c2"], ["c1"], ["x"]])])
    target = CodeVocab(("c1", "c2"))
    out, dropped = remap(src, target)
    assert dropped == 2
    assert out.patients[0].visits == ((1,), (0,))
