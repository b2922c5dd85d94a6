"""Scene-graph oracle implementations of the vision and knowledge tools.

Each call draws from its own random stream keyed by
``(noise.seed, scene_id, tool, call_index)``, so noisy answers depend only on
the call's identity, never on thread scheduling or evaluation order. With all
probabilities at zero every answer is the exact scene-graph truth.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from ..scene import DEFAULT_VOCAB, SceneGraph, SceneObject, Vocabulary
from ..seeding import make_rng
from ..values import PatchHandle
from .registry import ToolError


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    p_miss: float = 0.0
    p_false_positive: float = 0.0
    p_attr_flip: float = 0.0
    p_vqa_error: float = 0.0
    p_depth_jitter: float = 0.0
    depth_jitter_sigma: float = 0.05

    def __post_init__(self):
        for name in ("p_miss", "p_false_positive", "p_attr_flip", "p_vqa_error", "p_depth_jitter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")
        if self.depth_jitter_sigma < 0:
            raise ValueError("depth_jitter_sigma must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


ZERO_NOISE = NoiseConfig()


def _rng(noise: NoiseConfig, scene: SceneGraph, tool: str, call_index: int):
    return make_rng(noise.seed, scene.scene_id, tool, call_index)


def _centered_in(o: SceneObject, patch: PatchHandle) -> bool:
    return patch.contains_point(*o.center)


def _iou(a, b) -> float:
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union else 0.0


def resolve_object(scene: SceneGraph, patch: PatchHandle) -> SceneObject | None:
    """The object a patch shows: its detection source, else the best-overlapping
    object centered inside it."""
    if patch.object_id is not None:
        return scene.get(patch.object_id)
    inside = [o for o in scene.objects if _centered_in(o, patch)]
    if not inside:
        return None
    return min(inside, key=lambda o: (-_iou(o.box, patch.box), o.sort_key()))


def _detect(scene, patch, category, noise, rng, vocab) -> list[PatchHandle]:
    if category not in vocab.categories:
        return []
    hits = sorted((o for o in scene.objects if o.category == category and _centered_in(o, patch)), key=SceneObject.sort_key)
    found = []
    for o in hits:
        if rng.random() < noise.p_miss:
            continue
        found.append((o.box, o.object_id, False))
    if rng.random() < noise.p_false_positive:
        x1, y1, x2, y2 = patch.box
        bw, bh = x2 - x1, y2 - y1
        if bw >= 3 and bh >= 3:
            w = rng.randint(max(2, bw // 10), max(2, bw // 3))
            h = rng.randint(max(2, bh // 10), max(2, bh // 3))
            sx = rng.randint(x1, x2 - w)
            sy = rng.randint(y1, y2 - h)
            found.append(((sx, sy, sx + w, sy + h), None, True))
    found.sort(key=lambda f: (f[0][0], f[0][1], f[1] or "~"))
    out = []
    for i, (box, oid, spurious) in enumerate(found):
        try:
            out.append(patch.child(f"{patch.patch_id}/{category}{i}", box, label=category, object_id=oid, spurious=spurious))
        except ValueError:
            continue
    return out


def oracle_find(scene, patch, category, noise=ZERO_NOISE, call_index=0, vocab=DEFAULT_VOCAB) -> list[PatchHandle]:
    """Detect ``category`` inside ``patch``, ordered left to right (x1, then y1).

    Each true object is missed with ``p_miss``; with ``p_false_positive`` one
    spurious box is added. Unknown categories yield an empty list.
    """
    return _detect(scene, patch, category, noise, _rng(noise, scene, "find", call_index), vocab)


def oracle_exists(scene, patch, category, noise=ZERO_NOISE, call_index=0, vocab=DEFAULT_VOCAB) -> bool:
    return bool(_detect(scene, patch, category, noise, _rng(noise, scene, "exists", call_index), vocab))


def oracle_verify_property(scene, patch, category, prop, noise=ZERO_NOISE, call_index=0) -> bool:
    rng = _rng(noise, scene, "verify_property", call_index)
    if patch.spurious:
        return False
    if patch.object_id is not None:
        truth = prop in scene.get(patch.object_id).attributes
    else:
        truth = any(
            prop in o.attributes for o in scene.objects if o.category == category and _centered_in(o, patch)
        )
    flip = rng.random() < noise.p_attr_flip
    return truth != flip


def _norm_question(q: str) -> str:
    q = re.sub(r"[?.!]+", " ", q.lower())
    return " ".join(q.split())


_WHAT_IS = {"what is this", "what is it", "what object is this", "what is this object"}
_COLOR = re.compile(r"^what colou?r is (this|it|the \w[\w ]*)$")
_MATERIAL = {"what material is this", "what is this made of", "what is it made of"}
_HOW_MANY = re.compile(r"^how many (.+?) are (there|in the picture|in the image|in the photo)$")
_DESCRIBE = {"describe the image", "describe this image", "what is in the image", "describe the picture"}


def _caption(scene, patch, vocab) -> str:
    counts: dict[str, int] = {}
    for o in scene.objects:
        if _centered_in(o, patch):
            counts[o.category] = counts.get(o.category, 0) + 1
    if not counts:
        return "an empty picture"
    parts = [
        f"{c} {vocab.plural(cat)}" if c > 1 else f"{'an' if cat[0] in 'aeiou' else 'a'} {cat}"
        for cat, c in sorted(counts.items())
    ]
    listing = parts[0] if len(parts) == 1 else ", ".join(parts[:-1]) + " and " + parts[-1]
    return f"a picture of {listing}"


def _parse_count_phrase(phrase: str, vocab: Vocabulary):
    words = phrase.split()
    for i in range(len(words)):
        noun = " ".join(words[i:])
        cat = vocab.singular(noun)
        if cat is not None:
            return cat, words[:i]
    return None, []


def oracle_simple_query(scene, patch, question, noise=ZERO_NOISE, call_index=0, vocab=DEFAULT_VOCAB) -> str:
    """Answer the closed set of visual question templates about ``patch``.

    Handles "What is this?", "What color is this?", material questions,
    "How many <plural> are there?" (counted inside the patch) and image
    descriptions; anything else is "unknown". Category, color and count
    answers are replaced by a wrong answer of the same type with
    ``p_vqa_error``.
    """
    rng = _rng(noise, scene, "simple_query", call_index)
    corrupt = rng.random() < noise.p_vqa_error
    q = _norm_question(question)
    obj = None if patch.spurious else resolve_object(scene, patch)

    if q in _WHAT_IS:
        if patch.spurious:
            return rng.choice(vocab.categories)
        if obj is None:
            return "nothing"
        if corrupt:
            return rng.choice([c for c in vocab.categories if c != obj.category] or [obj.category])
        return obj.category
    if _COLOR.match(q):
        if patch.spurious:
            return rng.choice(vocab.colors)
        colors = sorted(a for a in obj.attributes if a in vocab.colors) if obj else []
        if not colors:
            return "unknown"
        if corrupt:
            return rng.choice([c for c in vocab.colors if c != colors[0]] or colors)
        return colors[0]
    if q in _MATERIAL:
        mats = sorted(a for a in obj.attributes if a in vocab.materials) if obj else []
        return mats[0] if mats else "unknown"
    m = _HOW_MANY.match(q)
    if m:
        cat, adjectives = _parse_count_phrase(m.group(1), vocab)
        if cat is None:
            return "unknown"
        need = set(adjectives)
        n = sum(1 for o in scene.objects if o.category == cat and need <= o.attributes and _centered_in(o, patch))
        if corrupt:
            n = n + 1 if n == 0 else n + rng.choice((-1, 1))
        return str(n)
    if q in _DESCRIBE:
        return _caption(scene, patch, vocab)
    return "unknown"


def oracle_compute_depth(scene, patch, noise=ZERO_NOISE, call_index=0) -> float:
    """Median depth of the patch: the detected object's depth when known."""
    rng = _rng(noise, scene, "compute_depth", call_index)
    if patch.spurious:
        depth = rng.uniform(0.05, 1.0)
    elif patch.object_id is not None:
        depth = scene.get(patch.object_id).depth
    else:
        inside = [o.depth for o in scene.objects if _centered_in(o, patch)]
        depth = statistics.median(inside) if inside else 1.0
    if rng.random() < noise.p_depth_jitter:
        depth = min(1.0, max(0.001, depth + rng.gauss(0.0, noise.depth_jitter_sigma)))
    return depth


# ---------------------------------------------------------------------------
# Knowledge table


def load_knowledge(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        text = resources.files("vpdistill").joinpath("assets/knowledge_v1.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    table = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, answer = line.partition("\t")
        table[_norm_question(key)] = answer.strip()
    return table


def oracle_llm_query(question: str, knowledge: Mapping[str, str]) -> str:
    return knowledge.get(_norm_question(question).rstrip(), "unknown")


class OracleBackend:
    """Tool backend answering from scene graphs, with seeded noise."""

    def __init__(
        self,
        scenes: Mapping[str, SceneGraph] | Iterable[SceneGraph],
        noise: NoiseConfig = ZERO_NOISE,
        vocab: Vocabulary = DEFAULT_VOCAB,
        knowledge: Mapping[str, str] | None = None,
    ):
        if not isinstance(scenes, Mapping):
            scenes = {s.scene_id: s for s in scenes}
        self.scenes = dict(scenes)
        self.noise = noise
        self.vocab = vocab
        self.knowledge = dict(load_knowledge() if knowledge is None else knowledge)

    def _scene(self, patch: PatchHandle) -> SceneGraph:
        try:
            return self.scenes[patch.scene_ref]
        except KeyError:
            raise ToolError("unknown-image", f"no scene {patch.scene_ref!r}") from None

    def find(self, patch, category, call_index):
        return oracle_find(self._scene(patch), patch, category, self.noise, call_index, self.vocab)

    def exists(self, patch, category, call_index):
        return oracle_exists(self._scene(patch), patch, category, self.noise, call_index, self.vocab)

    def verify_property(self, patch, category, prop, call_index):
        return oracle_verify_property(self._scene(patch), patch, category, prop, self.noise, call_index)

    def simple_query(self, patch, question, call_index):
        return oracle_simple_query(self._scene(patch), patch, question, self.noise, call_index, self.vocab)

    def compute_depth(self, patch, call_index):
        return oracle_compute_depth(self._scene(patch), patch, self.noise, call_index)

    def llm_query(self, question, call_index):
        return oracle_llm_query(question, self.knowledge)
