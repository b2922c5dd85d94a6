"""Turning execution traces into natural-language rationales.

The template renderer writes one sentence per tool call and a closing
"Thus, ..." sentence. The LLM renderer asks a model to do the same through
the CoT-conversion prompt and keeps its text only if it mentions every box and
tool answer from the trace and ends on the program's answer; otherwise the
template rationale is used.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .filter import normalize_answer
from .interpreter import ExecutionTrace, Returned, TraceEntry
from .llm import LlmError
from .prompts import COT_CONVERSION, fill, load_prompt
from .scene import DEFAULT_VOCAB, Vocabulary, article

log = logging.getLogger(__name__)

ROOT_PATCH = "image"
_COUNT_Q = re.compile(r"^how many (.+?) (?:are|can you see|do you see)\b.*$", re.I)
_BOXES = re.compile(r"\d+ \d+ \d+ \d+")


class RationaleError(ValueError):
    pass


@dataclass(frozen=True)
class Rationale:
    text: str
    covered_steps: tuple[int, ...]
    final_answer_span: tuple[int, int]
    source: str = "template"

    @property
    def final_answer(self) -> str:
        a, b = self.final_answer_span
        return self.text[a:b]


def _boxes(rendered: str) -> list[str]:
    return _BOXES.findall(rendered)


def _join(items: list[str]) -> str:
    return items[0] if len(items) == 1 else ", ".join(items[:-1]) + " and " + items[-1]


def _where(entry: TraceEntry) -> str:
    r = entry.receiver
    if r is None or r["patch_id"] == ROOT_PATCH:
        return "in the picture"
    return f"inside {r['box']}"


def _subject(entry: TraceEntry, category: str | None = None) -> str:
    r = entry.receiver
    if r is None or r["patch_id"] == ROOT_PATCH:
        return "the picture"
    name = category or r.get("label") or "region"
    return f"the {name} at {r['box']}"


def entry_sentence(entry: TraceEntry, vocab: Vocabulary = DEFAULT_VOCAB) -> str:
    tool, args, res = entry.tool, entry.args, entry.result
    if tool == "find":
        cat = args[0]
        boxes = _boxes(res)
        if not boxes:
            return f"There are no {vocab.plural(cat)} {_where(entry)}."
        # hits inside a sub-region also name the region searched
        where = "" if _where(entry) == "in the picture" else f" {_where(entry)}"
        if len(boxes) == 1:
            return f"There is {article(cat)} {cat} at {boxes[0]}{where}."
        return f"There are {len(boxes)} {vocab.plural(cat)} at {_join(boxes)}{where}."
    if tool == "exists":
        cat = args[0]
        if res == "True":
            return f"There is {article(cat)} {cat} {_where(entry)}."
        return f"There is no {cat} {_where(entry)}."
    if tool == "verify_property":
        cat, prop = args
        subject = _subject(entry, cat)
        verb = "is" if res == "True" else "is not"
        return f"{subject[0].upper()}{subject[1:]} {verb} {prop}."
    if tool == "compute_depth":
        subject = _subject(entry)
        return f"{subject[0].upper()}{subject[1:]} has depth {res}."
    if tool == "simple_query":
        return f'The answer to "{args[0]}" for {_subject(entry)} is {res}.'
    if tool == "llm_query":
        return f'The answer to "{args[0]}" is {res}.'
    return f"{tool}({', '.join(args)}) gives {res}."


def _count_description(query_text: str, vocab: Vocabulary):
    m = _COUNT_Q.match(query_text.strip())
    if not m:
        return None
    words = m.group(1).split()
    for i in range(len(words)):
        noun = " ".join(words[i:])
        single = vocab.singular(noun)
        if single is not None:
            return " ".join(words[:i]), single, noun
    return None


def conclusion(query_text: str, answer: str, vocab: Vocabulary = DEFAULT_VOCAB) -> tuple[str, tuple[int, int]]:
    """Closing sentence and the span of the answer inside it."""
    desc = _count_description(query_text, vocab)
    if desc is not None and answer.strip().isdigit():
        adj, single, plural = desc
        n = int(answer)
        noun = f"{adj} {single if n == 1 else plural}".strip()
        head = "Thus, there is " if n == 1 else "Thus, there are "
        return f"{head}{answer.strip()} {noun}.", (len(head), len(head) + len(answer.strip()))
    head = "Thus, the answer is "
    return f"{head}{answer}.", (len(head), len(head) + len(answer))


def render_rationale_template(
    trace: ExecutionTrace, query_text: str, answer: str, vocab: Vocabulary = DEFAULT_VOCAB
) -> Rationale:
    if not isinstance(trace.outcome, Returned):
        raise RationaleError("cannot explain a failed execution")
    if normalize_answer(trace.outcome.value) != normalize_answer(answer):
        raise RationaleError(f"answer {answer!r} differs from the traced result {trace.outcome.value!r}")
    sentences = [entry_sentence(e, vocab) for e in trace.entries]
    final, (a, b) = conclusion(query_text, answer, vocab)
    body = " ".join(sentences)
    offset = len(body) + 1 if body else 0
    text = f"{body} {final}" if body else final
    return Rationale(text, tuple(e.step for e in trace.entries), (offset + a, offset + b))


# ---------------------------------------------------------------------------
# Validation shared by both renderers


def required_mentions(entry: TraceEntry) -> list[str]:
    """Strings a faithful explanation of ``entry`` must contain."""
    need = []
    r = entry.receiver
    if r is not None and r["patch_id"] != ROOT_PATCH:
        need.append(r["box"])
    need += _boxes(entry.result)
    if entry.tool in ("simple_query", "llm_query", "compute_depth") and not entry.result.startswith("<error"):
        need.append(entry.result)
    return need


def covered_steps(text: str, trace: ExecutionTrace) -> tuple[int, ...]:
    low = text.lower()
    return tuple(e.step for e in trace.entries if all(m.lower() in low for m in required_mentions(e)))


def find_final_answer(text: str, answer: str) -> tuple[int, int] | None:
    """Span in the last "Thus" sentence whose normalized form equals ``answer``."""
    target = normalize_answer(answer)
    if not target:
        return None
    start = text.lower().rfind("thus")
    if start < 0:
        return None
    tokens = [(m.start() + start, m.end() + start) for m in re.finditer(r"\S+", text[start:])]
    best = None
    for i in range(len(tokens)):
        for j in range(i, min(len(tokens), i + 8)):
            a, b = tokens[i][0], tokens[j][1]
            span = text[a:b]
            stripped = span.strip(".,;:!?\"'()")
            if normalize_answer(stripped) == target:
                off = span.find(stripped)
                best = (a + off, a + off + len(stripped))
    return best


def validate_rationale(text: str, trace: ExecutionTrace, answer: str) -> Rationale | None:
    """A Rationale for ``text`` if it covers the trace and ends on ``answer``."""
    if not text.strip():
        return None
    steps = covered_steps(text, trace)
    if len(steps) != len(trace.entries):
        return None
    span = find_final_answer(text, answer)
    if span is None:
        return None
    return Rationale(text, steps, span, source="llm")


# ---------------------------------------------------------------------------
# LLM renderer


def format_trace(trace: ExecutionTrace) -> str:
    lines = []
    for e in trace.entries:
        r = e.receiver
        recv = "" if r is None else ("image." if r["patch_id"] == ROOT_PATCH else f"[{r['box']}].")
        args = ", ".join(f'"{a}"' for a in e.args)
        lines.append(f"{e.step}. {recv}{e.tool}({args}) -> {e.result}")
    return "\n".join(lines) if lines else "(no tool calls)"


def render_rationale_llm(
    trace: ExecutionTrace,
    query_text: str,
    program_source: str,
    answer: str,
    llm,
    *,
    prompt_path: str | None = None,
    vocab: Vocabulary = DEFAULT_VOCAB,
) -> Rationale:
    fallback = render_rationale_template(trace, query_text, answer, vocab)
    try:
        template = load_prompt(COT_CONVERSION, prompt_path)
        prompt = fill(
            template,
            query=query_text,
            program=program_source.rstrip("\n"),
            execution_trace=format_trace(trace),
            output=answer,
        )
        choices = llm.complete(prompt, n=1, temperature=0.0)
    except LlmError as exc:
        log.warning("rationale LLM unavailable, using template: %s", exc)
        return fallback
    text = choices[0].text.strip().split("\n\n")[0].strip() if choices else ""
    if text.lower().startswith("explanation:"):
        text = text[len("explanation:"):].strip()
    accepted = validate_rationale(text, trace, answer)
    if accepted is None:
        log.info("rationale from LLM failed validation, using template")
        return fallback
    return accepted
