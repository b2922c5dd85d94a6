"""Synthetic scene graphs, structured queries over them, and an exact oracle.

Scenes stand in for annotated photographs: every object has a pixel box, a
category, a set of attributes and a depth value (smaller is closer to the
camera). Queries are generated from a scene together with their gold answer,
which is always recomputable with :func:`oracle_answer`.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .seeding import derive_seed

RELATIONS = ("left_of", "right_of", "above", "below", "on", "holding", "near")
SPATIAL_RELATIONS = ("left_of", "right_of", "above", "below")
DEAD_ZONE = 0.02
DEPTH_TIE = 1e-6


class SceneError(ValueError):
    """Invalid scene, config or vocabulary."""


class NoViableQuery(SceneError):
    """The scene cannot support a query of the requested kind."""


# ---------------------------------------------------------------------------
# Vocabulary


@dataclass(frozen=True)
class Vocabulary:
    version: str
    categories: tuple[str, ...]
    plurals: tuple[str, ...]
    colors: tuple[str, ...]
    materials: tuple[str, ...]

    def __post_init__(self):
        if not self.categories or not self.colors:
            raise SceneError("vocabulary needs at least one category and one color")
        if len(self.plurals) != len(self.categories):
            raise SceneError("every category needs a plural form")

    @property
    def attributes(self) -> tuple[str, ...]:
        return self.colors + self.materials

    def plural(self, category: str) -> str:
        try:
            return self.plurals[self.categories.index(category)]
        except ValueError:
            return category + "s"

    def singular(self, plural: str) -> str | None:
        if plural in self.plurals:
            return self.categories[self.plurals.index(plural)]
        if plural in self.categories:
            return plural
        return None

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        sections: dict[str, list[str]] = {}
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections.setdefault(current, [])
            elif current is None:
                raise SceneError(f"vocabulary entry outside a section: {line!r}")
            else:
                sections[current].append(raw.rstrip("\n").strip())
        meta = dict(_split_tab(line) for line in sections.get("meta", []))
        cats = [_split_tab(line) for line in sections.get("categories", [])]
        return cls(
            version=meta.get("version", "0"),
            categories=tuple(c for c, _ in cats),
            plurals=tuple(p for _, p in cats),
            colors=tuple(sections.get("colors", [])),
            materials=tuple(sections.get("materials", [])),
        )


def _split_tab(line: str) -> tuple[str, str]:
    if "\t" in line:
        a, b = line.split("\t", 1)
        return a.strip(), b.strip()
    return line, line + "s"


def load_vocabulary(path: str | Path | None = None) -> Vocabulary:
    """Load a vocabulary file; the bundled ``vocab_v1.txt`` by default."""
    if path is None:
        text = resources.files("vpdistill").joinpath("assets/vocab_v1.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return Vocabulary.from_text(text)


DEFAULT_VOCAB = load_vocabulary()


# ---------------------------------------------------------------------------
# Scene graph types


@dataclass(frozen=True)
class SceneObject:
    object_id: str
    category: str
    box: tuple[int, int, int, int]
    attributes: frozenset[str]
    depth: float

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (x1 < x2 and y1 < y2):
            raise SceneError(f"object {self.object_id}: degenerate box {self.box}")
        if not (0.0 < self.depth <= 1.0):
            raise SceneError(f"object {self.object_id}: depth {self.depth} outside (0, 1]")

    @property
    def center(self) -> tuple[float, float]:
        x1, y1, x2, y2 = self.box
        return (x1 + x2) / 2, (y1 + y2) / 2

    def sort_key(self):
        return (self.box[0], self.box[1], self.object_id)


@dataclass(frozen=True)
class Relation:
    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class SceneGraph:
    scene_id: str
    width: int
    height: int
    objects: tuple[SceneObject, ...]
    relations: tuple[Relation, ...] = ()

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SceneError("scene dimensions must be positive")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SceneError(f"scene {self.scene_id}: duplicate object ids")
        for o in self.objects:
            x1, y1, x2, y2 = o.box
            if x1 < 0 or y1 < 0 or x2 > self.width or y2 > self.height:
                raise SceneError(f"object {o.object_id} box {o.box} outside the image")
        known = set(ids)
        for r in self.relations:
            if r.relation not in RELATIONS:
                raise SceneError(f"unknown relation {r.relation!r}")
            if r.subject not in known or r.object not in known:
                raise SceneError(f"relation {r} references a missing object")

    def get(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    def of_category(self, category: str) -> list[SceneObject]:
        """Objects of ``category`` ordered left to right (x1, then y1)."""
        return sorted((o for o in self.objects if o.category == category), key=SceneObject.sort_key)

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "width": self.width,
            "height": self.height,
            "objects": [
                {
                    "object_id": o.object_id,
                    "category": o.category,
                    "box": list(o.box),
                    "attributes": sorted(o.attributes),
                    "depth": o.depth,
                }
                for o in self.objects
            ],
            "relations": [
                {"subject": r.subject, "relation": r.relation, "object": r.object}
                for r in self.relations
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SceneGraph":
        try:
            objects = tuple(
                SceneObject(
                    object_id=o["object_id"],
                    category=o["category"],
                    box=tuple(int(v) for v in o["box"]),
                    attributes=frozenset(o["attributes"]),
                    depth=float(o["depth"]),
                )
                for o in d["objects"]
            )
            relations = tuple(
                Relation(r["subject"], r["relation"], r["object"]) for r in d.get("relations", [])
            )
            return cls(d["scene_id"], int(d["width"]), int(d["height"]), objects, relations)
        except (KeyError, TypeError) as exc:
            raise SceneError(f"malformed scene record: {exc}") from exc


@dataclass(frozen=True)
class SceneGenConfig:
    min_objects: int = 2
    max_objects: int = 8
    width: int = 640
    height: int = 480
    relation_density: float = 0.3
    max_palette: int = 5
    vocab: Vocabulary = field(default=DEFAULT_VOCAB, repr=False)

    def validate(self) -> None:
        if not self.vocab.categories or not self.vocab.colors:
            raise SceneError("empty vocabulary")
        if self.max_objects <= 0:
            raise SceneError("max_objects must be positive")
        if self.min_objects < 0 or self.min_objects > self.max_objects:
            raise SceneError(f"bad object-count range {self.min_objects}..{self.max_objects}")
        if not 0.0 <= self.relation_density <= 1.0:
            raise SceneError("relation_density must lie in [0, 1]")
        if self.width < 20 or self.height < 20:
            raise SceneError("image must be at least 20x20 pixels")

    def to_dict(self) -> dict:
        return {
            "min_objects": self.min_objects,
            "max_objects": self.max_objects,
            "width": self.width,
            "height": self.height,
            "relation_density": self.relation_density,
            "max_palette": self.max_palette,
            "vocab_version": self.vocab.version,
        }


def scene_id_for(seed: int) -> str:
    return f"s_{seed:04d}"


def seed_from_scene_id(scene_id: str) -> int:
    if not scene_id.startswith("s_"):
        raise SceneError(f"scene id {scene_id!r} does not encode a seed")
    try:
        return int(scene_id[2:])
    except ValueError:
        raise SceneError(f"scene id {scene_id!r} does not encode a seed") from None


def generate_scene(seed: int, config: SceneGenConfig | None = None) -> SceneGraph:
    """Generate one scene; a pure function of ``(seed, config)``."""
    config = config or SceneGenConfig()
    config.validate()
    vocab = config.vocab
    rng = random.Random(derive_seed("scene", seed))
    W, H = config.width, config.height

    n = rng.randint(max(config.min_objects, 0), config.max_objects)
    palette_size = min(len(vocab.categories), rng.randint(2, max(2, config.max_palette)))
    palette = rng.sample(vocab.categories, palette_size)

    objects = []
    for i in range(n):
        category = rng.choice(palette)
        w = rng.randint(max(4, W // 20), max(5, W * 3 // 10))
        h = rng.randint(max(4, H // 20), max(5, H * 3 // 10))
        x1 = rng.randint(0, W - w)
        y1 = rng.randint(0, H - h)
        attrs = {rng.choice(vocab.colors)}
        if vocab.materials and rng.random() < 0.4:
            attrs.add(rng.choice(vocab.materials))
        depth = round(rng.uniform(0.05, 1.0), 4)
        objects.append(SceneObject(f"o{i}", category, (x1, y1, x1 + w, y1 + h), frozenset(attrs), depth))

    relations = []
    for a in objects:
        for b in objects:
            if a is b or rng.random() >= config.relation_density:
                continue
            relations.append(Relation(a.object_id, _geometric_relation(a, b, W), b.object_id))
    return SceneGraph(scene_id_for(seed), W, H, tuple(objects), tuple(relations))


def _geometric_relation(a: SceneObject, b: SceneObject, width: int) -> str:
    (ax, ay), (bx, by) = a.center, b.center
    dx, dy = bx - ax, by - ay
    if (dx * dx + dy * dy) ** 0.5 < 0.1 * width:
        return "holding" if a.category == "person" else "near"
    horizontal_overlap = a.box[0] < b.box[2] and b.box[0] < a.box[2]
    if horizontal_overlap and 0 <= b.box[1] - a.box[3] < 0.05 * width:
        return "on"
    if abs(dx) >= abs(dy):
        return "left_of" if dx > 0 else "right_of"
    return "above" if dy > 0 else "below"


# ---------------------------------------------------------------------------
# Queries


class QueryKind(str, enum.Enum):
    COUNT = "Count"
    EXISTS = "Exists"
    ATTRIBUTE = "Attribute"
    SPATIAL = "Spatial"
    DEPTH_COMPARE = "DepthCompare"
    MULTI_CHOICE = "MultiChoice"


ALL_KINDS = tuple(QueryKind)

TASK_FOR_KIND = {
    QueryKind.COUNT: "counting",
    QueryKind.MULTI_CHOICE: "multiple_choice",
}
TASKS = ("vqa_freeform", "multiple_choice", "counting")
OPTION_LETTERS = "ABCD"


@dataclass(frozen=True)
class StructuredQuery:
    """A query over a scene.

    ``category`` is the target (Count, Exists, Attribute) or the subject /
    first option (Spatial, DepthCompare); ``other`` is the second object.
    ``attributes`` restricts Count and Exists; ``relation`` is the Spatial
    relation; ``options`` lists MultiChoice categories.
    """

    kind: QueryKind
    category: str | None = None
    attributes: tuple[str, ...] = ()
    relation: str | None = None
    other: str | None = None
    options: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", QueryKind(self.kind))
        k = self.kind
        if k in (QueryKind.COUNT, QueryKind.EXISTS, QueryKind.ATTRIBUTE) and not self.category:
            raise SceneError(f"{k.value} query needs a category")
        if k in (QueryKind.SPATIAL, QueryKind.DEPTH_COMPARE):
            if not (self.category and self.other) or self.category == self.other:
                raise SceneError(f"{k.value} query needs two distinct categories")
        if k is QueryKind.SPATIAL and self.relation not in SPATIAL_RELATIONS:
            raise SceneError(f"Spatial relation must be one of {SPATIAL_RELATIONS}")
        if k is QueryKind.MULTI_CHOICE and not 2 <= len(self.options) <= 4:
            raise SceneError("MultiChoice needs 2-4 options")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "category": self.category,
            "attributes": list(self.attributes),
            "relation": self.relation,
            "other": self.other,
            "options": list(self.options),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StructuredQuery":
        return cls(
            kind=QueryKind(d["kind"]),
            category=d.get("category"),
            attributes=tuple(d.get("attributes", ())),
            relation=d.get("relation"),
            other=d.get("other"),
            options=tuple(d.get("options", ())),
        )


@dataclass(frozen=True)
class GoldSample:
    """A question about a scene; ``gold_answer`` is None for unlabeled samples."""

    sample_id: str
    scene_id: str
    query: StructuredQuery
    query_text: str
    gold_answer: str | None
    task: str

    @property
    def labeled(self) -> bool:
        return self.gold_answer is not None

    def unlabeled(self) -> "GoldSample":
        return GoldSample(self.sample_id, self.scene_id, self.query, self.query_text, None, self.task)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "scene_id": self.scene_id,
            "query": self.query.to_dict(),
            "query_text": self.query_text,
            "gold_answer": self.gold_answer,
            "task": self.task,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GoldSample":
        return cls(
            d["sample_id"],
            d["scene_id"],
            StructuredQuery.from_dict(d["query"]),
            d["query_text"],
            d.get("gold_answer"),
            d["task"],
        )


def _center_delta(a: SceneObject, b: SceneObject, relation: str) -> float:
    """Signed center offset; positive means ``a relation b`` holds."""
    (ax, ay), (bx, by) = a.center, b.center
    return {
        "left_of": bx - ax,
        "right_of": ax - bx,
        "above": by - ay,
        "below": ay - by,
    }[relation]


def spatial_verdict(scene: SceneGraph, a: SceneObject, b: SceneObject, relation: str) -> str:
    """"yes", "no" or "ambiguous" when the centers fall inside the dead zone."""
    extent = scene.width if relation in ("left_of", "right_of") else scene.height
    delta = _center_delta(a, b, relation)
    if abs(delta) <= DEAD_ZONE * extent:
        return "ambiguous"
    return "yes" if delta > 0 else "no"


def oracle_answer(
    scene: SceneGraph, query: StructuredQuery, vocab: Vocabulary = DEFAULT_VOCAB
) -> str:
    """Answer ``query`` exactly by enumerating the scene graph.

    Named objects (Attribute, Spatial, DepthCompare) resolve to the leftmost
    object of the category, matching the detection order of the tools.
    """
    k = query.kind
    if k is QueryKind.COUNT:
        need = set(query.attributes)
        n = sum(1 for o in scene.objects if o.category == query.category and need <= o.attributes)
        return str(n)
    if k is QueryKind.EXISTS:
        need = set(query.attributes)
        hit = any(o.category == query.category and need <= o.attributes for o in scene.objects)
        return "yes" if hit else "no"
    if k is QueryKind.ATTRIBUTE:
        objs = scene.of_category(query.category)
        if not objs:
            return "none"
        colors = sorted(a for a in objs[0].attributes if a in vocab.colors)
        return colors[0] if colors else "none"
    if k is QueryKind.SPATIAL:
        subj, obj = scene.of_category(query.category), scene.of_category(query.other)
        if not subj or not obj:
            return "no"
        return spatial_verdict(scene, subj[0], obj[0], query.relation)
    if k is QueryKind.DEPTH_COMPARE:
        a, b = scene.of_category(query.category), scene.of_category(query.other)
        if not a or not b:
            return "none"
        if abs(a[0].depth - b[0].depth) < DEPTH_TIE:
            return "ambiguous"
        return query.category if a[0].depth < b[0].depth else query.other
    if k is QueryKind.MULTI_CHOICE:
        present = {o.category for o in scene.objects}
        for letter, option in zip(OPTION_LETTERS, query.options):
            if option in present:
                return letter
        return "none"
    raise SceneError(f"unsupported query kind {k}")


def article(noun: str) -> str:
    return "an" if noun[:1].lower() in "aeiou" else "a"


def render_query(query: StructuredQuery, vocab: Vocabulary = DEFAULT_VOCAB) -> str:
    """Deterministic natural-language rendering of a structured query."""
    k = query.kind
    adj = " ".join(query.attributes)
    if k is QueryKind.COUNT:
        noun = vocab.plural(query.category)
        return f"How many {adj + ' ' if adj else ''}{noun} are in the picture?"
    if k is QueryKind.EXISTS:
        phrase = f"{adj} {query.category}" if adj else query.category
        return f"Is there {article(phrase)} {phrase} in the picture?"
    if k is QueryKind.ATTRIBUTE:
        return f"What color is the {query.category}?"
    if k is QueryKind.SPATIAL:
        rel = {
            "left_of": "to the left of",
            "right_of": "to the right of",
            "above": "above",
            "below": "below",
        }[query.relation]
        return f"Is the {query.category} {rel} the {query.other}?"
    if k is QueryKind.DEPTH_COMPARE:
        return f"Which is closer to the camera, the {query.category} or the {query.other}?"
    if k is QueryKind.MULTI_CHOICE:
        opts = " ".join(f"({l}) {o}" for l, o in zip(OPTION_LETTERS, query.options))
        return f"Which of these objects is in the picture? {opts}"
    raise SceneError(f"unsupported query kind {k}")


def _unique_objects(scene: SceneGraph) -> list[SceneObject]:
    counts: dict[str, int] = {}
    for o in scene.objects:
        counts[o.category] = counts.get(o.category, 0) + 1
    return sorted((o for o in scene.objects if counts[o.category] == 1), key=SceneObject.sort_key)


def generate_query(
    scene: SceneGraph,
    seed: int,
    kind: QueryKind | str,
    vocab: Vocabulary = DEFAULT_VOCAB,
    sample_id: str | None = None,
) -> GoldSample:
    """Draw a query of ``kind`` answerable on ``scene``.

    Raises :class:`NoViableQuery` when the scene cannot support the kind,
    e.g. Spatial with fewer than two uniquely-named objects, or when every
    candidate pair is ambiguous (dead zone, depth tie).
    """
    kind = QueryKind(kind)
    rng = random.Random(derive_seed("query", scene.scene_id, seed, kind.value))
    present = sorted({o.category for o in scene.objects})
    absent = [c for c in vocab.categories if c not in present]

    if kind in (QueryKind.COUNT, QueryKind.EXISTS):
        if present and (not absent or rng.random() < 0.8):
            category = rng.choice(present)
        elif absent:
            category = rng.choice(absent)
        else:
            raise NoViableQuery("empty vocabulary")
        attrs: tuple[str, ...] = ()
        if rng.random() < 0.6:
            seen = sorted({a for o in scene.objects if o.category == category for a in o.attributes if a in vocab.colors})
            pool = seen if seen and rng.random() < 0.8 else list(vocab.colors)
            attrs = (rng.choice(pool),)
        query = StructuredQuery(kind, category=category, attributes=attrs)
    elif kind is QueryKind.ATTRIBUTE:
        unique = _unique_objects(scene)
        if not unique:
            raise NoViableQuery(f"{scene.scene_id}: no uniquely named object")
        query = StructuredQuery(kind, category=rng.choice(unique).category)
    elif kind is QueryKind.SPATIAL:
        unique = _unique_objects(scene)
        viable = [
            (a.category, rel, b.category)
            for a in unique
            for b in unique
            if a is not b
            for rel in SPATIAL_RELATIONS
            if spatial_verdict(scene, a, b, rel) != "ambiguous"
        ]
        if not viable:
            raise NoViableQuery(f"{scene.scene_id}: no unambiguous object pair")
        subj, rel, obj = rng.choice(viable)
        query = StructuredQuery(kind, category=subj, relation=rel, other=obj)
    elif kind is QueryKind.DEPTH_COMPARE:
        unique = _unique_objects(scene)
        viable = [
            (a.category, b.category)
            for a in unique
            for b in unique
            if a is not b and abs(a.depth - b.depth) >= DEPTH_TIE
        ]
        if not viable:
            raise NoViableQuery(f"{scene.scene_id}: no depth-separable object pair")
        a, b = rng.choice(viable)
        query = StructuredQuery(kind, category=a, other=b)
    elif kind is QueryKind.MULTI_CHOICE:
        if not present or not absent:
            raise NoViableQuery(f"{scene.scene_id}: needs present and absent categories")
        n_options = rng.randint(2, min(4, len(absent) + 1))
        options = [rng.choice(present)] + rng.sample(absent, n_options - 1)
        rng.shuffle(options)
        query = StructuredQuery(kind, options=tuple(options))
    else:  # pragma: no cover
        raise NoViableQuery(f"unsupported kind {kind}")

    answer = oracle_answer(scene, query, vocab)
    if answer in ("ambiguous", "none"):
        raise NoViableQuery(f"{scene.scene_id}: {kind.value} query has no clean answer")
    return GoldSample(
        sample_id=sample_id or f"{scene.scene_id}:{kind.value}:{seed}",
        scene_id=scene.scene_id,
        query=query,
        query_text=render_query(query, vocab),
        gold_answer=answer,
        task=TASK_FOR_KIND.get(kind, "vqa_freeform"),
    )


def generate_corpus(
    scenes: Sequence[SceneGraph],
    seed: int,
    n: int | None = None,
    kinds: Sequence[QueryKind | str] = ALL_KINDS,
    vocab: Vocabulary = DEFAULT_VOCAB,
) -> list[GoldSample]:
    """Build ``n`` labeled samples (default: one per scene), cycling kinds.

    Sample ``i`` asks a ``kinds[i % len(kinds)]`` question, starting from
    scene ``i % len(scenes)`` and moving to the next scene when the kind is
    not viable. Samples whose kind no scene supports are skipped.
    """
    if not scenes:
        return []
    kinds = [QueryKind(k) for k in kinds]
    n = len(scenes) if n is None else n
    samples = []
    for i in range(n):
        kind = kinds[i % len(kinds)]
        for attempt in range(len(scenes)):
            scene = scenes[(i + attempt) % len(scenes)]
            try:
                sample = generate_query(
                    scene, derive_seed(seed, i, attempt), kind, vocab, sample_id=f"q_{i:05d}"
                )
            except NoViableQuery:
                continue
            samples.append(sample)
            break
    return samples


# ---------------------------------------------------------------------------
# Line-delimited corpora


def dump_scenes(scenes: Iterable[SceneGraph], path: str | Path, header: Mapping | None = None) -> None:
    """Write one scene per line; an optional first line carries ``{"__header__": ...}``."""
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"__header__": dict(header)}, separators=(",", ":")) + "\n")
        for s in scenes:
            fh.write(json.dumps(s.to_dict(), separators=(",", ":")) + "\n")


def iter_scenes(path: str | Path) -> Iterator[SceneGraph]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SceneError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if isinstance(d, dict) and "__header__" in d:
                continue
            try:
                yield SceneGraph.from_dict(d)
            except (SceneError, KeyError, TypeError, ValueError) as exc:
                raise SceneError(f"{path}:{lineno}: bad scene record: {exc}") from exc


def load_scenes(path: str | Path) -> list[SceneGraph]:
    return list(iter_scenes(path))
