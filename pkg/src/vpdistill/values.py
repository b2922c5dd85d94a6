"""Runtime values shared by the interpreter and the tool backends.

Programs manipulate plain Python ``int``, ``float``, ``str`` and ``bool``
values, image regions (:class:`PatchHandle`) and lists of regions.
"""

from __future__ import annotations

from dataclasses import dataclass

Box = tuple[int, int, int, int]
GRID = 1000


class ProgramError(Exception):
    """A runtime failure of a visual program (never a crash of the engine)."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        self.message = message
        super().__init__(f"{kind}: {message}")


@dataclass(frozen=True)
class PatchHandle:
    """A rectangular region of an input image.

    ``box`` is in pixels of the root image. ``label``, ``object_id`` and
    ``spurious`` are detector bookkeeping: the category a region was found
    as, and which scene object (if any) produced it.
    """

    patch_id: str
    scene_ref: str
    box: Box
    image_size: tuple[int, int]
    label: str | None = None
    object_id: str | None = None
    spurious: bool = False

    @property
    def left(self) -> int:
        return self.box[0]

    @property
    def top(self) -> int:
        return self.box[1]

    @property
    def right(self) -> int:
        return self.box[2]

    @property
    def bottom(self) -> int:
        return self.box[3]

    @property
    def center_x(self) -> float:
        return (self.box[0] + self.box[2]) / 2

    @property
    def center_y(self) -> float:
        return (self.box[1] + self.box[3]) / 2

    def contains_point(self, x: float, y: float) -> bool:
        return self.box[0] <= x <= self.box[2] and self.box[1] <= y <= self.box[3]

    def child(self, patch_id: str, box, *, label=None, object_id=None, spurious=False) -> "PatchHandle":
        """A sub-region clipped to this patch; raises ValueError if empty."""
        x1, y1, x2, y2 = (int(round(v)) for v in box)
        px1, py1, px2, py2 = self.box
        x1, x2 = max(px1, min(x1, px2)), max(px1, min(x2, px2))
        y1, y2 = max(py1, min(y1, py2)), max(py1, min(y2, py2))
        if x1 >= x2 or y1 >= y2:
            raise ValueError(f"empty region {box} inside {self.box}")
        return PatchHandle(patch_id, self.scene_ref, (x1, y1, x2, y2), self.image_size, label, object_id, spurious)


@dataclass(frozen=True)
class VisualInput:
    """A visual input: a scene id (oracle tools) or an opaque image handle."""

    ref: str
    width: int
    height: int

    @classmethod
    def from_scene(cls, scene) -> "VisualInput":
        return cls(scene.scene_id, scene.width, scene.height)

    def root_patch(self) -> PatchHandle:
        return PatchHandle("image", self.ref, (0, 0, self.width, self.height), (self.width, self.height))


def quantize(v: float, size: int) -> int:
    return min(GRID - 1, max(0, int(v * GRID / size)))


def quantize_box(box: Box, image_size: tuple[int, int]) -> tuple[int, int, int, int]:
    w, h = image_size
    x1, y1, x2, y2 = box
    return quantize(x1, w), quantize(y1, h), quantize(x2, w), quantize(y2, h)


def render_box(patch: PatchHandle) -> str:
    """Box on the 0-999 grid as ``"x1 y1 x2 y2"``."""
    return " ".join(str(v) for v in quantize_box(patch.box, patch.image_size))


def render_value(v) -> str:
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.3f}"
    if isinstance(v, str):
        return v
    if isinstance(v, PatchHandle):
        return render_box(v)
    if isinstance(v, list):
        return "[" + ", ".join(render_value(x) for x in v) + "]"
    raise TypeError(f"not a program value: {v!r}")


def type_name(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, PatchHandle):
        return "patch"
    if isinstance(v, list):
        return "patch list"
    return type(v).__name__
