"""Answer matching and selection of one program per sample."""

from __future__ import annotations

import enum
import logging
import string
from dataclasses import dataclass

from .interpreter import DEFAULT_BUDGET, ExecutionTrace, execute
from .llm import LlmError
from .progen import Candidate, CandidateSet
from .prompts import ANSWER_VERIFICATION, fill, load_prompt
from .scene import GoldSample

log = logging.getLogger(__name__)

ARTICLES = frozenset({"a", "an", "the"})
NUMBER_WORDS = {
    w: str(i)
    for i, w in enumerate(
        "zero one two three four five six seven eight nine ten eleven twelve thirteen fourteen"
        " fifteen sixteen seventeen eighteen nineteen twenty".split()
    )
}
_EDGE = string.punctuation + string.whitespace


def normalize_answer(raw: str) -> str:
    """Lowercase, trim punctuation, drop articles, number words to digits.

    An answer made only of an article ("A" as an option letter) keeps it.
    """
    tokens = raw.lower().strip(_EDGE).split()
    kept = [t for t in tokens if t not in ARTICLES] or tokens
    return " ".join(NUMBER_WORDS.get(t, t) for t in kept)


def string_match(pred: str, gold: str) -> bool:
    a, b = normalize_answer(pred), normalize_answer(gold)
    if not a or not b:
        return False
    return a == b or a == b + "s" or b == a + "s"


def parse_verdict(text: str) -> bool:
    words = text.strip().split()
    first = words[0].strip(_EDGE).lower() if words else ""
    if first in ("yes", "no"):
        return first == "yes"
    log.info("judge reply without a yes/no verdict, counting as no: %r", text[:80])
    return False


class LlmJudge:
    """Asks an LLM whether a prediction matches the reference answer."""

    def __init__(self, llm, prompt_path: str | None = None):
        self.llm = llm
        self.template = load_prompt(ANSWER_VERIFICATION, prompt_path)

    def __call__(self, query: str, gold: str, prediction: str) -> bool:
        prompt = fill(self.template, query=query, gold=gold, prediction=prediction)
        choices = self.llm.complete(prompt, n=1, temperature=0.0)
        return bool(choices) and parse_verdict(choices[0].text)


def answers_match(pred: str, gold: str, judge=None, query: str = "") -> bool:
    """String rules first; the judge only sees pairs the rules reject."""
    if not pred.strip() or not gold.strip():
        return False
    if string_match(pred, gold):
        return True
    if judge is None:
        return False
    try:
        return bool(judge(query, gold, pred))
    except (LlmError, OSError) as exc:
        log.warning("judge unavailable, keeping string verdict: %s", exc)
        return False


class FilterStatus(str, enum.Enum):
    SELECTED_PROGRAM = "SelectedProgram"
    LABEL_ONLY = "LabelOnly"
    UNLABELED_TOP = "UnlabeledTop"
    GENERATION_FAILED = "GenerationFailed"


@dataclass(frozen=True)
class FilterOutcome:
    status: FilterStatus
    candidates_executed: int
    candidates_correct: int
    candidate_rank: int | None = None
    program_hash: str | None = None
    answer: str | None = None
    trace: ExecutionTrace | None = None
    gold_answer: str | None = None
    candidate: Candidate | None = None
    correct_ranks: tuple[int, ...] = ()

    @property
    def has_rationale(self) -> bool:
        return self.status in (FilterStatus.SELECTED_PROGRAM, FilterStatus.UNLABELED_TOP)


def _best(items):
    return min(items, key=lambda it: (-it[0].score, it[0].program_hash))


def filter_candidates(sample: GoldSample, executed, judge=None) -> FilterOutcome:
    """Pick the top-scoring correct program, or fall back.

    Labeled samples always end as SelectedProgram or LabelOnly; unlabeled ones
    as UnlabeledTop or GenerationFailed.
    """
    ran = [e for e in executed if e[2] is not None]
    ok = [e for e in ran if e[1] is not None and e[1].strip()]
    if sample.labeled:
        correct = [e for e in ok if answers_match(e[1], sample.gold_answer, judge, sample.query_text)]
        if not correct:
            return FilterOutcome(FilterStatus.LABEL_ONLY, len(ran), 0, gold_answer=sample.gold_answer)
        cand, result, trace = _best(correct)
        return FilterOutcome(
            FilterStatus.SELECTED_PROGRAM, len(ran), len(correct), cand.rank, cand.program_hash,
            result, trace, sample.gold_answer, cand, tuple(sorted(e[0].rank for e in correct)),
        )
    if not ok:
        return FilterOutcome(FilterStatus.GENERATION_FAILED, len(ran), 0)
    cand, result, trace = _best(ok)
    return FilterOutcome(FilterStatus.UNLABELED_TOP, len(ran), 0, cand.rank, cand.program_hash, result, trace, None, cand)


def execute_candidates(cset: CandidateSet, visual_input, tools, budget: int = DEFAULT_BUDGET) -> list[tuple]:
    """Run every parse-valid candidate; identical programs run once."""
    cache: dict[str, tuple] = {}
    out = []
    for cand in cset.candidates:
        prog = cand.program
        if prog is None:
            out.append((cand, None, None))
            continue
        if prog.program_hash not in cache:
            cache[prog.program_hash] = execute(prog, visual_input, tools, budget)
        result, trace = cache[prog.program_hash]
        out.append((cand, result, trace))
    return out
