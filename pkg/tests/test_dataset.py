import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from vpdistill.cot import Rationale
from vpdistill.dataset import (
    FIELDS,
    INSTRUCTIONS,
    PIPELINE_VERSION,
    RATIONALE_SUFFIX,
    DatasetError,
    PipelineError,
    TrainingRecord,
    emit_records,
    read_header,
    read_jsonl,
    write_jsonl,
)
from vpdistill.filter import FilterOutcome, FilterStatus
from vpdistill.interpreter import ExecutionTrace, Returned, TraceEntry
from vpdistill.scene import TASKS, GoldSample, QueryKind, StructuredQuery, render_query

Q = StructuredQuery(QueryKind.COUNT, category="bus", attributes=("yellow",))
MC = StructuredQuery(QueryKind.MULTI_CHOICE, options=("dog", "piano"))
TRACE = ExecutionTrace(
    (TraceEntry(1, "find", {"patch_id": "image", "box": "0 0 999 999", "label": None}, ("bus",), "[1 2 3 4]"),),
    Returned("1"),
    12,
)
RATIONALE = Rationale("There is a bus at 1 2 3 4. Thus, there is 1 bus.", (1,), (42, 43))


def sample(i=0, labeled=True, query=Q, task="counting", gold="1"):
    s = GoldSample(f"q_{i:05d}", "s_0001", query, render_query(query), gold, task)
    return s if labeled else s.unlabeled()


def selected(answer="1"):
    return FilterOutcome(FilterStatus.SELECTED_PROGRAM, 5, 1, 1, "abcd" * 4, answer, TRACE, "1")


LABEL_ONLY = FilterOutcome(FilterStatus.LABEL_ONLY, 5, 0, gold_answer="1")


def test_instruction_strings():
    assert INSTRUCTIONS["vqa_freeform"] == "Answer with a single word or phrase"
    assert INSTRUCTIONS["multiple_choice"] == "Answer with the option letter from the given choices directly"
    assert RATIONALE_SUFFIX == "Explain the rationale to answer the question"


def test_selected_program_gives_two_records():
    recs = emit_records(sample(), selected(), RATIONALE, global_seed=7)
    assert [r.objective for r in recs] == ["label", "rationale"]
    label, rat = recs
    assert label.instruction == "Answer with a single word or phrase" and label.target == "1"
    assert rat.instruction.endswith("Explain the rationale to answer the question")
    assert rat.target == RATIONALE.text
    assert label.meta == {
        "program_hash": "abcd" * 4, "trace_len": 1, "filter_status": "SelectedProgram",
        "pipeline_version": PIPELINE_VERSION, "global_seed": 7,
    }
    assert label.query == "How many yellow buses are in the picture?"


def test_label_only_gives_one_record():
    recs = emit_records(sample(), LABEL_ONLY, None)
    assert len(recs) == 1 and recs[0].objective == "label" and recs[0].target == "1"
    assert recs[0].meta["program_hash"] is None and recs[0].meta["trace_len"] == 0


def test_multiple_choice_label_is_letter():
    s = sample(query=MC, task="multiple_choice", gold="B")
    out = FilterOutcome(FilterStatus.LABEL_ONLY, 5, 0, gold_answer="B")
    (rec,) = emit_records(s, out, None)
    assert rec.target == "B" and "(A) dog (B) piano" in rec.query
    assert rec.instruction == INSTRUCTIONS["multiple_choice"]


def test_unlabeled_paths():
    top = FilterOutcome(FilterStatus.UNLABELED_TOP, 1, 0, 1, "ff" * 8, "2", TRACE)
    recs = emit_records(sample(labeled=False), top, RATIONALE)
    assert [r.target for r in recs] == ["2", RATIONALE.text]
    failed = FilterOutcome(FilterStatus.GENERATION_FAILED, 1, 0)
    assert emit_records(sample(labeled=False), failed, None) == []
    with pytest.raises(PipelineError):
        emit_records(sample(), failed, None)


def test_missing_rationale_is_hard_error():
    with pytest.raises(PipelineError):
        emit_records(sample(), selected(), None)


def test_record_count_arithmetic():
    recs = []
    for i in range(100):
        if i < 70:
            recs += emit_records(sample(i), selected(), RATIONALE)
        else:
            recs += emit_records(sample(i), LABEL_ONLY, None)
    assert len(recs) == 170
    assert sum(r.objective == "rationale" for r in recs) == 70
    assert sum(r.objective == "label" for r in recs) == 100


def random_record(rng, i):
    objective = rng.choice(["label", "rationale"])
    text = "".join(rng.choice("abc xyzé中\"\\\n\t.") for _ in range(rng.randint(1, 40)))
    return TrainingRecord(
        id=f"q_{i:05d}:{objective}",
        image_ref=f"s_{rng.randrange(10**4):04d}",
        query=text or "q",
        task=rng.choice(TASKS),
        instruction=RATIONALE_SUFFIX if objective == "rationale" else INSTRUCTIONS["vqa_freeform"],
        target=text.strip() or "x",
        objective=objective,
        meta={
            "program_hash": rng.choice([None, f"{rng.randrange(16**16):016x}"]),
            "trace_len": rng.randint(0, 9),
            "filter_status": rng.choice([s.value for s in FilterStatus]),
            "pipeline_version": PIPELINE_VERSION,
            "global_seed": rng.randrange(2**63),
        },
    )


def test_round_trip_1000(tmp_path):
    rng = random.Random(5)
    recs = [random_record(rng, i) for i in range(1000)]
    p = tmp_path / "d.jsonl"
    assert write_jsonl(recs, p, header={"k": 5}) == 1000
    assert read_jsonl(p) == recs
    assert read_header(p) == {"k": 5}
    first = json.loads(p.read_text().splitlines()[1])
    assert tuple(first) == FIELDS


@settings(max_examples=100, deadline=None)
@given(st.text(min_size=1), st.text(min_size=1).filter(str.strip))
def test_round_trip_arbitrary_text(tmp_path_factory, query, target):
    rec = TrainingRecord("q:label", "s_1", query, "counting", "x", target, "label",
                         {"program_hash": None, "trace_len": 0, "filter_status": "LabelOnly",
                          "pipeline_version": PIPELINE_VERSION, "global_seed": 0})
    p = tmp_path_factory.mktemp("rt") / "d.jsonl"
    write_jsonl([rec], p)
    assert read_jsonl(p) == [rec]


def test_missing_objective_names_line(tmp_path):
    rng = random.Random(1)
    good = random_record(rng, 0).to_dict()
    bad = dict(good)
    del bad["objective"]
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(DatasetError) as exc:
        read_jsonl(p)
    assert exc.value.line == 2 and "objective" in str(exc.value)


def test_unknown_fields_strict_vs_lenient(tmp_path):
    d = random_record(random.Random(2), 0).to_dict()
    d["note"] = "hello"
    d["meta"]["extra_meta"] = 1
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps(d) + "\n")
    with pytest.raises(DatasetError, match="line 1"):
        read_jsonl(p)
    (rec,) = read_jsonl(p, strict=False)
    assert rec.extra == {"note": "hello"} and rec.meta["extra_meta"] == 1
    assert rec.to_dict() == d


def test_empty_file(tmp_path):
    p = tmp_path / "d.jsonl"
    assert write_jsonl([], p) == 0
    assert p.read_text() == ""
    assert read_jsonl(p) == []


def test_schema_violations(tmp_path):
    base = random_record(random.Random(3), 0).to_dict()
    for mutate in [
        lambda d: d.update(objective="both"),
        lambda d: d.update(task="ocr"),
        lambda d: d.update(target=""),
        lambda d: d.update(meta=[]),
        lambda d: d["meta"].pop("global_seed"),
    ]:
        d = json.loads(json.dumps(base))
        mutate(d)
        p = tmp_path / "d.jsonl"
        p.write_text(json.dumps(d) + "\n")
        with pytest.raises(DatasetError):
            read_jsonl(p)
    p.write_text("{not json\n")
    with pytest.raises(DatasetError, match="line 1"):
        read_jsonl(p)
