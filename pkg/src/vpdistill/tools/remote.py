"""HTTP tool backend.

Each tool is one POST route taking a flat JSON object and returning a flat
JSON object. Field names are listed in ``REQUEST_FIELDS`` and
``RESPONSE_FIELDS`` and documented in docs/interfaces.md.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

from .. import net
from ..values import PatchHandle
from .registry import ToolError

log = logging.getLogger(__name__)

REQUEST_FIELDS = {
    "find": ("image", "width", "height", "x1", "y1", "x2", "y2", "category"),
    "exists": ("image", "width", "height", "x1", "y1", "x2", "y2", "category"),
    "verify_property": ("image", "width", "height", "x1", "y1", "x2", "y2", "category", "property"),
    "simple_query": ("image", "width", "height", "x1", "y1", "x2", "y2", "question"),
    "compute_depth": ("image", "width", "height", "x1", "y1", "x2", "y2"),
    "llm_query": ("question",),
}
RESPONSE_FIELDS = {
    "find": ("boxes", list),
    "exists": ("exists", bool),
    "verify_property": ("result", bool),
    "simple_query": ("answer", str),
    "compute_depth": ("depth", (int, float)),
    "llm_query": ("answer", str),
}


@dataclass(frozen=True)
class RemoteToolConfig:
    base_url: str
    api_key_env: str = "VPD_API_KEY"
    timeout_ms: int = 30_000
    routes: dict = field(default_factory=dict)
    pool_size: int = 8

    def __post_init__(self):
        net.require_online("remote tool backend")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if not self.base_url:
            raise ValueError("base_url is required")

    def route(self, tool: str) -> str:
        return self.routes.get(tool, tool)

    def url(self, tool: str) -> str:
        return f"{self.base_url.rstrip('/')}/{self.route(tool).lstrip('/')}"


def remote_tool_call(config: RemoteToolConfig, tool: str, payload: dict, session=None) -> dict:
    """POST one tool request and return the validated response object."""
    import requests

    if tool not in REQUEST_FIELDS:
        raise ToolError("schema", f"unknown tool {tool!r}")
    missing = [k for k in REQUEST_FIELDS[tool] if k not in payload]
    if missing:
        raise ToolError("schema", f"{tool} payload lacks {missing}")
    api_key = os.environ.get(config.api_key_env)
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    url = config.url(tool)
    log.debug("POST %s %s", url, net.redact(json.dumps(payload), api_key))
    http = session or requests
    try:
        resp = http.post(url, json=payload, headers=headers, timeout=config.timeout_ms / 1000)
    except requests.Timeout as exc:
        raise ToolError("timeout", f"{tool}: {exc}") from None
    except requests.RequestException as exc:
        raise ToolError("http", f"{tool}: {net.redact(str(exc), api_key)}") from None
    log.debug("%s -> %s %s", url, resp.status_code, net.redact(resp.text[:500], api_key))
    if not 200 <= resp.status_code < 300:
        raise ToolError("http", f"{tool}: HTTP {resp.status_code}")
    try:
        body = resp.json()
    except ValueError:
        raise ToolError("schema", f"{tool}: response is not JSON") from None
    key, typ = RESPONSE_FIELDS[tool]
    if not isinstance(body, dict) or key not in body:
        raise ToolError("schema", f"{tool}: response lacks {key!r}")
    value = body[key]
    if not isinstance(value, typ) or (typ is not bool and isinstance(value, bool)):
        raise ToolError("schema", f"{tool}: {key!r} has the wrong type")
    return body


class RemoteBackend:
    """Tool backend that forwards every call to HTTP services."""

    def __init__(self, config: RemoteToolConfig, session=None):
        self.config = config
        self.session = session or net.make_session(config.pool_size)

    def _post(self, tool, patch: PatchHandle | None, **extra):
        payload = {}
        if patch is not None:
            x1, y1, x2, y2 = patch.box
            w, h = patch.image_size
            payload.update(image=patch.scene_ref, width=w, height=h, x1=x1, y1=y1, x2=x2, y2=y2)
        payload.update(extra)
        return remote_tool_call(self.config, tool, payload, self.session)

    def find(self, patch, category, call_index):
        boxes = self._post("find", patch, category=category)["boxes"]
        out = []
        for i, box in enumerate(boxes):
            if not (isinstance(box, list) and len(box) == 4 and all(isinstance(v, (int, float)) for v in box)):
                raise ToolError("schema", "find: each box must be [x1, y1, x2, y2]")
            try:
                out.append(patch.child(f"{patch.patch_id}/{category}{len(out)}", box, label=category))
            except ValueError:
                continue
        out.sort(key=lambda p: (p.box[0], p.box[1]))
        return out

    def exists(self, patch, category, call_index):
        return self._post("exists", patch, category=category)["exists"]

    def verify_property(self, patch, category, prop, call_index):
        return self._post("verify_property", patch, category=category, property=prop)["result"]

    def simple_query(self, patch, question, call_index):
        return self._post("simple_query", patch, question=question)["answer"]

    def compute_depth(self, patch, call_index):
        return float(self._post("compute_depth", patch)["depth"])

    def llm_query(self, question, call_index):
        return self._post("llm_query", None, question=question)["answer"]
