"""Minimal client for OpenAI-compatible chat-completions endpoints.

Used for program generation, answer verification and trace-to-rationale
conversion. Constructing a client in offline mode raises ``OfflineError``.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from . import net

log = logging.getLogger(__name__)


class LlmError(Exception):
    """Transport or protocol failure talking to the LLM endpoint."""


@dataclass(frozen=True)
class LlmConfig:
    base_url: str
    model: str
    api_key_env: str = "VPD_LLM_API_KEY"
    timeout_ms: int = 60_000
    max_tokens: int = 1024
    request_logprobs: bool = True
    pool_size: int = 8

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if not self.base_url or not self.model:
            raise ValueError("base_url and model are required")


@dataclass(frozen=True)
class Choice:
    text: str
    logprob: float | None = None  # sum of token log-probs, when returned


class LlmClient:
    def __init__(self, config: LlmConfig, session=None, retries: int = 1):
        net.require_online("LLM client")
        self.config = config
        self.retries = retries
        self.session = session or net.make_session(config.pool_size)

    def _post(self, body: dict) -> dict:
        import requests

        key = os.environ.get(self.config.api_key_env)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(url, json=body, headers=headers, timeout=self.config.timeout_ms / 1000)
                if not 200 <= resp.status_code < 300:
                    raise LlmError(f"HTTP {resp.status_code}")
                data = resp.json()
                if not isinstance(data, dict) or not isinstance(data.get("choices"), list):
                    raise LlmError("response has no choices list")
                return data
            except (requests.RequestException, ValueError, LlmError) as exc:
                last = exc
                log.warning("LLM request failed (attempt %d): %s", attempt + 1, net.redact(str(exc), key))
        raise LlmError(net.redact(str(last), key))

    def complete(self, prompt: str, *, n: int = 1, temperature: float = 0.0) -> list[Choice]:
        """Sample ``n`` completions of a single user message."""
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "n": n,
            "max_tokens": self.config.max_tokens,
        }
        if self.config.request_logprobs:
            body["logprobs"] = True
        data = self._post(body)
        out = []
        for ch in data["choices"]:
            msg = ch.get("message") if isinstance(ch, dict) else None
            text = msg.get("content") if isinstance(msg, dict) else None
            if not isinstance(text, str):
                raise LlmError("choice without text content")
            out.append(Choice(text, _logprob_sum(ch.get("logprobs"))))
        return out


def _logprob_sum(lp) -> float | None:
    if not isinstance(lp, dict):
        return None
    content = lp.get("content")
    if not isinstance(content, list) or not content:
        return None
    try:
        return float(sum(t["logprob"] for t in content))
    except (KeyError, TypeError, ValueError):
        return None
