"""Candidate program generation.

Two modes produce a ranked :class:`CandidateSet` per sample:

``template``
    Offline and deterministic. The canonical program for the query kind and
    its four corrupted variants are ordered by a per-sample seeded draw: the
    canonical program takes rank 1 with probability ``1 - corruption_rate``,
    otherwise a uniformly chosen rank in 2..5. The first ``k`` slots are
    returned, so the set at any ``k`` is a prefix of the set at 5.

``llm``
    Samples ``k`` completions of the code-generation prompt from an
    OpenAI-compatible endpoint, deduplicated by program hash.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .llm import LlmError
from .prompts import CODE_GENERATION, fill, load_prompt
from .scene import DEFAULT_VOCAB, GoldSample, Vocabulary
from .seeding import make_rng
from .templates import N_VARIANTS, template_catalog
from .tools import TOOL_API_DESCRIPTION
from .vpl import ParseError, Program, try_parse
from .vpl.parser import content_hash

log = logging.getLogger(__name__)

MODES = ("template", "llm")
MAX_TEMPLATE_K = N_VARIANTS + 1
CAPTION_QUESTION = "Describe the image."


@dataclass(frozen=True)
class GenConfig:
    k: int = 5
    temperature: float = 0.5
    mode: str = "template"
    seed: int = 0
    prompt_template_path: str | None = None
    corruption_rate: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "template" and self.k > MAX_TEMPLATE_K:
            raise ValueError(f"template mode supports k <= {MAX_TEMPLATE_K}")
        if not 0.0 <= self.corruption_rate <= 1.0:
            raise ValueError("corruption_rate must be in [0, 1]")


@dataclass(frozen=True)
class Candidate:
    rank: int
    source: str
    score: float
    parse_result: Program | ParseError
    variant: str | None = None

    @property
    def program(self) -> Program | None:
        return self.parse_result if isinstance(self.parse_result, Program) else None

    @property
    def program_hash(self) -> str:
        p = self.program
        return p.program_hash if p is not None else content_hash(self.source)

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "score": self.score,
            "variant": self.variant,
            "program_hash": self.program_hash,
            "parse_error": None if self.program else str(self.parse_result),
        }


@dataclass(frozen=True)
class CandidateSet:
    sample_id: str
    candidates: tuple[Candidate, ...] = ()
    error: str | None = None  # set when generation failed

    @property
    def failed(self) -> bool:
        return self.error is not None

    def __len__(self):
        return len(self.candidates)

    def prefix(self, k: int) -> "CandidateSet":
        return CandidateSet(self.sample_id, self.candidates[:k], self.error)


def rank_candidates(items: list[tuple[str, float, Program | ParseError, str | None]]) -> tuple[Candidate, ...]:
    """Sort by score descending, ties by program hash ascending, and number the ranks."""

    def key(item):
        source, score, parsed, _ = item
        h = parsed.program_hash if isinstance(parsed, Program) else content_hash(source)
        return (-score, h)

    ordered = sorted(items, key=key)
    return tuple(Candidate(i + 1, s, score, parsed, v) for i, (s, score, parsed, v) in enumerate(ordered))


def template_order(sample_id: str, seed: int, corruption_rate: float, variants: list[str]) -> list[str]:
    """Slot order of canonical and variant programs for one sample."""
    rng = make_rng(seed, "progen", sample_id)
    top = rng.random() >= corruption_rate
    rest = list(variants)
    rng.shuffle(rest)
    if top:
        return ["canonical"] + rest
    pos = rng.randint(1, len(rest))
    return rest[:pos] + ["canonical"] + rest[pos:]


def template_scores(sample_id: str, seed: int, n: int) -> list[float]:
    """Strictly decreasing plausibility scores from their own random stream."""
    rng = make_rng(seed, "progen-score", sample_id)
    s, out = 0.0, []
    for _ in range(n):
        s -= rng.uniform(0.05, 1.0)
        out.append(round(s, 6))
    return out


def _template_candidates(sample: GoldSample, config: GenConfig, vocab: Vocabulary) -> CandidateSet:
    catalog = template_catalog(sample.query, vocab)
    variants = [v for v in catalog if v != "canonical"]
    order = template_order(sample.sample_id, config.seed, config.corruption_rate, variants)[: config.k]
    scores = template_scores(sample.sample_id, config.seed, len(order))
    items = [(catalog[v], sc, try_parse(catalog[v]), v) for v, sc in zip(order, scores)]
    return CandidateSet(sample.sample_id, rank_candidates(items))


_FENCE = re.compile(r"```(?:python|py)?\s*\n(.*?)```", re.S)


def extract_program(text: str) -> str:
    """Pull the function definition out of a completion (fences, chatter)."""
    m = _FENCE.search(text)
    if m:
        text = m.group(1)
    i = text.find("def execute_command")
    if i > 0:
        text = text[i:]
    return text.strip() + "\n"


def _llm_candidates(sample, config, llm, caption) -> CandidateSet:
    template = load_prompt(CODE_GENERATION, config.prompt_template_path)
    prompt = fill(
        template,
        tool_api_description=TOOL_API_DESCRIPTION,
        caption=caption or "",
        query=sample.query_text,
    )
    try:
        choices = llm.complete(prompt, n=config.k, temperature=config.temperature)
        # providers that ignore n return a single choice; top up sequentially
        if len(choices) == 1 and config.k > 1:
            for _ in range(config.k - 1):
                choices = choices + llm.complete(prompt, n=1, temperature=config.temperature)
    except LlmError as exc:
        log.warning("program generation failed for %s: %s", sample.sample_id, exc)
        return CandidateSet(sample.sample_id, (), f"generation-failed: {exc}")
    seen, items = set(), []
    for i, ch in enumerate(choices[: config.k]):
        source = extract_program(ch.text)
        parsed = try_parse(source)
        h = parsed.program_hash if isinstance(parsed, Program) else content_hash(source)
        if h in seen:
            continue
        seen.add(h)
        score = ch.logprob if ch.logprob is not None else -float(i + 1)
        items.append((source, score, parsed, None))
    return CandidateSet(sample.sample_id, rank_candidates(items))


def generate_candidates(
    sample: GoldSample,
    config: GenConfig,
    llm=None,
    *,
    caption: str | None = None,
    vocab: Vocabulary = DEFAULT_VOCAB,
) -> CandidateSet:
    """Produce up to ``config.k`` ranked candidate programs for ``sample``.

    ``caption`` fills the prompt's caption slot in llm mode; callers obtain it
    from ``simple_query("Describe the image.")`` on the whole image.
    """
    if config.mode == "template":
        if llm is not None:
            raise ValueError("template mode takes no LLM client")
        return _template_candidates(sample, config, vocab)
    if llm is None:
        raise ValueError("llm mode needs an LLM client")
    return _llm_candidates(sample, config, llm, caption)
