"""Training records and their JSONL serialization.

Each sample yields a short-answer record (objective ``label``) and, when a
program was selected, a rationale record (objective ``rationale``). A trainer
that sums the length-normalized cross-entropy of every record's target
recovers the two-term distillation loss; samples without a selected program
contribute only their label term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .cot import Rationale
from .filter import FilterOutcome, FilterStatus
from .scene import TASKS, GoldSample

PIPELINE_VERSION = "vpdistill-jsonl/1"

INSTRUCTIONS = {
    "vqa_freeform": "Answer with a single word or phrase",
    "counting": "Answer with a single word or phrase",
    "multiple_choice": "Answer with the option letter from the given choices directly",
}
RATIONALE_SUFFIX = "Explain the rationale to answer the question"
OBJECTIVES = ("label", "rationale")

FIELDS = ("id", "image_ref", "query", "task", "instruction", "target", "objective", "meta")
META_FIELDS = ("program_hash", "trace_len", "filter_status", "pipeline_version", "global_seed")
HEADER_KEY = "__header__"


class PipelineError(RuntimeError):
    """A sample's outcome and artifacts are inconsistent."""


class DatasetError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class TrainingRecord:
    id: str
    image_ref: str
    query: str
    task: str
    instruction: str
    target: str
    objective: str
    meta: dict
    extra: dict = field(default_factory=dict, compare=True)

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in FIELDS}
        d["meta"] = {k: self.meta.get(k) for k in META_FIELDS} | {
            k: v for k, v in self.meta.items() if k not in META_FIELDS
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))


def _meta(outcome: FilterOutcome, global_seed: int) -> dict:
    return {
        "program_hash": outcome.program_hash,
        "trace_len": len(outcome.trace.entries) if outcome.trace is not None else 0,
        "filter_status": outcome.status.value,
        "pipeline_version": PIPELINE_VERSION,
        "global_seed": global_seed,
    }


def emit_records(
    sample: GoldSample, outcome: FilterOutcome, rationale: Rationale | None, global_seed: int = 0
) -> list[TrainingRecord]:
    """Label record for every usable answer; rationale record when a program was kept."""
    if outcome.status is FilterStatus.GENERATION_FAILED:
        if sample.labeled:
            raise PipelineError(f"{sample.sample_id}: labeled sample cannot end as GenerationFailed")
        return []
    if outcome.has_rationale and rationale is None:
        raise PipelineError(f"{sample.sample_id}: {outcome.status.value} needs a rationale")
    answer = sample.gold_answer if sample.labeled else outcome.answer
    if not answer or not answer.strip():
        return []
    meta = _meta(outcome, global_seed)
    common = dict(image_ref=sample.scene_id, query=sample.query_text, task=sample.task, meta=meta)
    records = [
        TrainingRecord(
            id=f"{sample.sample_id}:label",
            instruction=INSTRUCTIONS[sample.task],
            target=answer,
            objective="label",
            **common,
        )
    ]
    if outcome.has_rationale:
        records.append(
            TrainingRecord(
                id=f"{sample.sample_id}:rationale",
                instruction=RATIONALE_SUFFIX,
                target=rationale.text,
                objective="rationale",
                **common,
            )
        )
    return records


def record_from_dict(d: dict, *, strict: bool = True, line: int | None = None) -> TrainingRecord:
    if not isinstance(d, dict):
        raise DatasetError("record is not an object", line)
    for f in FIELDS:
        if f not in d:
            raise DatasetError(f"missing field {f!r}", line)
    for f in FIELDS[:-1]:
        if not isinstance(d[f], str):
            raise DatasetError(f"field {f!r} must be a string", line)
    if d["objective"] not in OBJECTIVES:
        raise DatasetError(f"objective must be one of {OBJECTIVES}", line)
    if d["task"] not in TASKS:
        raise DatasetError(f"task must be one of {TASKS}", line)
    if not d["target"]:
        raise DatasetError("empty target", line)
    meta = d["meta"]
    if not isinstance(meta, dict):
        raise DatasetError("meta must be an object", line)
    for f in META_FIELDS:
        if f not in meta:
            raise DatasetError(f"meta lacks {f!r}", line)
    unknown = [k for k in d if k not in FIELDS]
    unknown_meta = [k for k in meta if k not in META_FIELDS]
    if strict and (unknown or unknown_meta):
        raise DatasetError(f"unknown fields {unknown + ['meta.' + k for k in unknown_meta]}", line)
    return TrainingRecord(
        **{f: d[f] for f in FIELDS[:-1]},
        meta=dict(meta),
        extra={k: d[k] for k in unknown},
    )


def write_jsonl(records: Iterable, path: str | Path, header: dict | None = None) -> int:
    """Write one JSON object per line; returns the number of records."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(json.dumps({HEADER_KEY: header}, ensure_ascii=False, separators=(",", ":"), sort_keys=True) + "\n")
        for r in records:
            fh.write((r.to_json() if hasattr(r, "to_json") else json.dumps(r, ensure_ascii=False)) + "\n")
            n += 1
    return n


def read_header(path: str | Path) -> dict | None:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        obj = json.loads(first) if first.strip() else None
    except json.JSONDecodeError:
        return None
    return obj.get(HEADER_KEY) if isinstance(obj, dict) else None


def iter_json_lines(path: str | Path):
    """Yield ``(line_number, object)`` pairs, skipping blank lines and the header."""
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON: {exc.msg}", i) from None
            if isinstance(obj, dict) and HEADER_KEY in obj and len(obj) == 1:
                continue
            yield i, obj


def read_jsonl(path: str | Path, *, strict: bool = True) -> list[TrainingRecord]:
    return [record_from_dict(obj, strict=strict, line=i) for i, obj in iter_json_lines(path)]
