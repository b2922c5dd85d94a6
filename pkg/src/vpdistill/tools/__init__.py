"""Tool registry and backends (scene-graph oracle, HTTP)."""

from .registry import ToolError, ToolRegistry
from .oracle import (
    ZERO_NOISE,
    NoiseConfig,
    OracleBackend,
    load_knowledge,
    oracle_compute_depth,
    oracle_exists,
    oracle_find,
    oracle_llm_query,
    oracle_simple_query,
    oracle_verify_property,
)
from .remote import RemoteBackend, RemoteToolConfig, remote_tool_call

TOOL_API_DESCRIPTION = """\
class ImagePatch:
    # A rectangular region of the image. Coordinates are pixels; top < bottom.
    left: int
    right: int
    top: int
    bottom: int
    center_x: float
    center_y: float

    def find(self, object_name: str) -> list[ImagePatch]:
        # Detect every object_name inside the patch, ordered left to right.
    def exists(self, object_name: str) -> bool:
        # True if at least one object_name is inside the patch.
    def verify_property(self, object_name: str, property: str) -> bool:
        # True if the object_name in the patch has the property (e.g. a color).
    def simple_query(self, question: str) -> str:
        # Answer a basic visual question about the patch, e.g. "What color is this?".
    def compute_depth(self) -> float:
        # Median depth of the patch; smaller values are closer to the camera.
    def crop(self, left, top, right, bottom) -> ImagePatch:
        # Sub-region in image pixel coordinates.

def llm_query(question: str) -> str:
    # Answer a question that needs external knowledge.
def bool_to_yesno(value: bool) -> str:
def distance(a: ImagePatch, b: ImagePatch) -> float:
    # Distance between patch centers.
# len, str and int behave as in Python. Only these names may be called.
"""


def oracle_registry(scenes, noise: NoiseConfig = ZERO_NOISE, **kwargs) -> ToolRegistry:
    return ToolRegistry(OracleBackend(scenes, noise, **kwargs))


__all__ = [
    "ToolError",
    "ToolRegistry",
    "NoiseConfig",
    "ZERO_NOISE",
    "OracleBackend",
    "RemoteBackend",
    "RemoteToolConfig",
    "remote_tool_call",
    "load_knowledge",
    "oracle_find",
    "oracle_exists",
    "oracle_verify_property",
    "oracle_simple_query",
    "oracle_compute_depth",
    "oracle_llm_query",
    "oracle_registry",
    "TOOL_API_DESCRIPTION",
]
