"""End-to-end driver: generate, execute, filter, explain, emit.

``run_pipeline`` processes every sample of a corpus on a bounded thread pool
and merges results in sample-id order, so the JSONL file and the report are
identical for any worker count.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .config import PipelineConfig
from .cot import Rationale, render_rationale_llm, render_rationale_template
from .dataset import TrainingRecord, emit_records, write_jsonl
from .filter import FilterOutcome, FilterStatus, LlmJudge, answers_match, execute_candidates, filter_candidates, string_match
from .progen import CAPTION_QUESTION, GenConfig, generate_candidates
from .scene import GoldSample, SceneGraph, TASKS, generate_corpus
from .seeding import derive_seed
from .tools import OracleBackend, RemoteBackend, RemoteToolConfig, ToolRegistry
from .values import VisualInput

log = logging.getLogger(__name__)

# Gains over the no-rationale baseline reported for models trained on real
# benchmark data; kept for reference only, this harness cannot reproduce them.
REFERENCE_GAINS = {"GQA": "+45%", "A-OKVQA": "+45%", "OK-VQA": "+33%", "TallyQA": "+10%"}


@dataclass
class Corpus:
    scenes: Mapping[str, SceneGraph]
    samples: Sequence[GoldSample]


def build_corpus(scenes: Sequence[SceneGraph], config: PipelineConfig) -> Corpus:
    """Queries over ``scenes``; a seeded fraction of samples lose their label."""
    samples = generate_corpus(list(scenes), config.global_seed, n=config.n_samples, kinds=config.query_kinds)
    if config.unlabeled_fraction > 0:
        out = []
        for s in samples:
            u = derive_seed(config.global_seed, "unlabeled", s.sample_id) / 2**64
            out.append(s.unlabeled() if u < config.unlabeled_fraction else s)
        samples = out
    return Corpus({s.scene_id: s for s in scenes}, samples)


@dataclass(frozen=True)
class SampleResult:
    sample_id: str
    task: str
    labeled: bool
    status: FilterStatus
    records: tuple[TrainingRecord, ...]
    success_at_1: bool
    success_at_k: bool
    trace_len: int
    candidates_executed: int
    error: str | None = None
    rationale: Rationale | None = None
    outcome: FilterOutcome | None = None


@dataclass
class TaskStats:
    n_samples: int = 0
    n_labeled: int = 0
    success_at_1: float = 0.0
    success_at_k: float = 0.0
    label_only_fraction: float = 0.0
    mean_trace_len: float = 0.0
    mean_candidates_executed: float = 0.0
    n_selected: int = 0
    n_label_only: int = 0
    n_unlabeled_top: int = 0
    n_generation_failed: int = 0
    n_errors: int = 0
    n_label_records: int = 0
    n_rationale_records: int = 0

    @classmethod
    def from_results(cls, results: Sequence[SampleResult]) -> "TaskStats":
        st = cls(n_samples=len(results))
        labeled = [r for r in results if r.labeled]
        st.n_labeled = len(labeled)
        for r in results:
            st.n_selected += r.status is FilterStatus.SELECTED_PROGRAM
            st.n_label_only += r.status is FilterStatus.LABEL_ONLY
            st.n_unlabeled_top += r.status is FilterStatus.UNLABELED_TOP
            st.n_generation_failed += r.status is FilterStatus.GENERATION_FAILED
            st.n_errors += r.error is not None
            st.n_label_records += sum(rec.objective == "label" for rec in r.records)
            st.n_rationale_records += sum(rec.objective == "rationale" for rec in r.records)
        if labeled:
            st.success_at_1 = sum(r.success_at_1 for r in labeled) / len(labeled)
            st.success_at_k = sum(r.success_at_k for r in labeled) / len(labeled)
            st.label_only_fraction = st.n_label_only / len(labeled)
        kept = [r for r in results if r.status in (FilterStatus.SELECTED_PROGRAM, FilterStatus.UNLABELED_TOP)]
        if kept:
            st.mean_trace_len = sum(r.trace_len for r in kept) / len(kept)
        if results:
            st.mean_candidates_executed = sum(r.candidates_executed for r in results) / len(results)
        return st


@dataclass
class PipelineReport:
    overall: TaskStats
    per_task: dict[str, TaskStats]
    config: dict
    wall_time: float = 0.0
    reference_gains: dict = field(default_factory=lambda: dict(REFERENCE_GAINS))

    @property
    def n_samples(self) -> int:
        return self.overall.n_samples

    @property
    def success_at_1(self) -> float:
        return self.overall.success_at_1

    @property
    def success_at_k(self) -> float:
        return self.overall.success_at_k

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "overall": asdict(self.overall),
            "per_task": {t: asdict(s) for t, s in self.per_task.items()},
            "config": self.config,
            "reference_gains": self.reference_gains,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineReport":
        return cls(
            TaskStats(**d["overall"]),
            {t: TaskStats(**s) for t, s in d["per_task"].items()},
            d["config"],
            d.get("wall_time", 0.0),
            d.get("reference_gains", dict(REFERENCE_GAINS)),
        )

    def write(self, path: str | Path) -> None:
        # timing is left out so that reruns produce byte-identical files
        Path(path).write_text(json.dumps(self.to_dict(include_timing=False), indent=2, sort_keys=True) + "\n", "utf-8")

    def format(self) -> str:
        cols = ("n_samples", "success_at_1", "success_at_k", "label_only_fraction", "mean_trace_len",
                "mean_candidates_executed")
        rows = [("task",) + cols]
        tasks = [t for t in TASKS if t in self.per_task] + sorted(t for t in self.per_task if t not in TASKS)
        for name, st in [(t, self.per_task[t]) for t in tasks] + [("overall", self.overall)]:
            rows.append((name,) + tuple(_fmt(getattr(st, c)) for c in cols))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
        c = self.config
        lines.append("")
        lines.append(
            f"k={c.get('k')} T={c.get('temperature')} mode={c.get('mode')} seed={c.get('global_seed')} "
            f"corruption_rate={c.get('corruption_rate')} records: {self.overall.n_label_records} label, "
            f"{self.overall.n_rationale_records} rationale"
        )
        if self.wall_time:
            lines.append(f"wall time {self.wall_time:.2f}s")
        return "\n".join(lines)


def _fmt(v) -> str:
    return f"{v:.3f}" if isinstance(v, float) else str(v)


def make_report(results: Sequence[SampleResult], config: PipelineConfig, wall_time: float = 0.0) -> PipelineReport:
    per_task = {}
    for task in TASKS:
        sub = [r for r in results if r.task == task]
        if sub:
            per_task[task] = TaskStats.from_results(sub)
    return PipelineReport(TaskStats.from_results(results), per_task, config.echo(), wall_time)


# ---------------------------------------------------------------------------
# Per-sample processing


class Pipeline:
    """Shared, thread-safe components for processing samples."""

    def __init__(self, corpus: Corpus, config: PipelineConfig, *, tools=None, llm=None, judge=None):
        config.validate()
        self.corpus = corpus
        self.config = config
        if tools is None:
            if config.tool_backend == "remote":
                rc = RemoteToolConfig(config.tool_base_url, timeout_ms=config.tool_timeout_ms, pool_size=config.workers)
                tools = ToolRegistry(RemoteBackend(rc))
            else:
                tools = ToolRegistry(OracleBackend(corpus.scenes, config.noise))
        self.tools = tools
        if llm is None and config.needs_llm:
            from .llm import LlmClient, LlmConfig

            llm = LlmClient(LlmConfig(config.llm_base_url, config.llm_model, config.llm_api_key_env,
                                      config.llm_timeout_ms, pool_size=config.workers))
        self.llm = llm
        if judge is None and config.use_judge:
            judge = LlmJudge(llm, config.verify_prompt_path)
        self.judge = judge

    def gen_config(self, sample: GoldSample) -> GenConfig:
        c = self.config
        return GenConfig(
            k=c.k if sample.labeled else 1,
            temperature=c.temperature,
            mode=c.mode,
            seed=c.global_seed,
            prompt_template_path=c.code_prompt_path,
            corruption_rate=c.corruption_rate,
        )

    def process(self, sample: GoldSample) -> SampleResult:
        try:
            return self._process(sample)
        except Exception as exc:  # noqa: BLE001 - one bad sample must not stop the batch
            log.exception("sample %s failed", sample.sample_id)
            status = FilterStatus.LABEL_ONLY if sample.labeled else FilterStatus.GENERATION_FAILED
            outcome = FilterOutcome(status, 0, 0, gold_answer=sample.gold_answer)
            records = tuple(emit_records(sample, outcome, None, self.config.global_seed))
            return SampleResult(sample.sample_id, sample.task, sample.labeled, status, records, False, False, 0, 0,
                                error=f"{type(exc).__name__}: {exc}", outcome=outcome)

    def _process(self, sample: GoldSample) -> SampleResult:
        c = self.config
        scene = self.corpus.scenes[sample.scene_id]
        vi = VisualInput.from_scene(scene)
        caption = None
        if c.mode == "llm":
            caption = str(self.tools.call("simple_query", vi.root_patch(), (CAPTION_QUESTION,), 0))
        cset = generate_candidates(sample, self.gen_config(sample), self.llm if c.mode == "llm" else None,
                                   caption=caption)
        executed = execute_candidates(cset, vi, self.tools, c.budget)
        outcome = filter_candidates(sample, executed, self.judge)
        rationale = None
        if outcome.has_rationale:
            if c.cot_mode == "llm":
                rationale = render_rationale_llm(outcome.trace, sample.query_text, outcome.candidate.source,
                                                 outcome.answer, self.llm, prompt_path=c.cot_prompt_path)
            else:
                rationale = render_rationale_template(outcome.trace, sample.query_text, outcome.answer)
        records = tuple(emit_records(sample, outcome, rationale, c.global_seed))
        return SampleResult(
            sample.sample_id,
            sample.task,
            sample.labeled,
            outcome.status,
            records,
            success_at_1=1 in outcome.correct_ranks,
            success_at_k=outcome.status is FilterStatus.SELECTED_PROGRAM,
            trace_len=len(outcome.trace.entries) if outcome.trace is not None else 0,
            candidates_executed=outcome.candidates_executed,
            error=cset.error,
            rationale=rationale,
            outcome=outcome,
        )

    def run(self) -> list[SampleResult]:
        samples = sorted(self.corpus.samples, key=lambda s: s.sample_id)
        if self.config.workers == 1:
            return [self.process(s) for s in samples]
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return list(pool.map(self.process, samples))


def run_pipeline(corpus: Corpus, config: PipelineConfig, **components) -> tuple[str, PipelineReport]:
    """Process ``corpus`` and write the JSONL records and the report.

    Returns the JSONL path and the report. ``components`` may inject ``tools``,
    ``llm`` or ``judge`` (tests, custom backends).
    """
    t0 = time.perf_counter()
    pipe = Pipeline(corpus, config, **components)
    results = pipe.run()
    records = [rec for r in results for rec in r.records]
    out = config.output_path
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(records, out, header=config.echo())
    report = make_report(results, config, time.perf_counter() - t0)
    report.write(config.resolved_report_path)
    return out, report


def run_samples(corpus: Corpus, config: PipelineConfig, **components) -> list[SampleResult]:
    """Like :func:`run_pipeline` but returns per-sample results without writing files."""
    return Pipeline(corpus, config, **components).run()


# ---------------------------------------------------------------------------
# Scoring


def _vqa_item(pred: str, refs: Sequence[str]) -> float:
    if not refs:
        raise ValueError("VQAScore needs at least one reference answer per item")
    return min(1.0, sum(string_match(pred, r) for r in refs) / 3)


def score_answers(predictions: Sequence[str], golds: Sequence, metric: str = "EM") -> float:
    """Mean exact match (string rules) or VQA score ``min(1, matches / 3)``.

    For EM each gold is a string; for VQAScore a list of reference answers.
    """
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions for {len(golds)} golds")
    if not predictions:
        return 0.0
    m = metric.lower().replace("_", "").replace(" ", "")
    if m == "em":
        return sum(answers_match(p, g if isinstance(g, str) else g[0]) for p, g in zip(predictions, golds)) / len(predictions)
    if m == "vqascore":
        return sum(_vqa_item(p, [g] if isinstance(g, str) else g) for p, g in zip(predictions, golds)) / len(predictions)
    raise ValueError(f"unknown metric {metric!r}; use EM or VQAScore")
