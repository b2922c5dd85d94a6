"""Process-wide offline switch and shared HTTP plumbing.

When offline, constructing any network client raises :class:`OfflineError`
before a request can be made. ``VPD_OFFLINE=1`` in the environment starts
the process offline.
"""

from __future__ import annotations

import contextlib
import logging
import os
import re

log = logging.getLogger(__name__)

_offline = os.environ.get("VPD_OFFLINE", "") not in ("", "0")


class OfflineError(RuntimeError):
    """A network client was requested while the process is offline."""


def set_offline(flag: bool) -> None:
    global _offline
    _offline = bool(flag)


def is_offline() -> bool:
    return _offline


@contextlib.contextmanager
def offline(flag: bool = True):
    prev = _offline
    set_offline(flag)
    try:
        yield
    finally:
        set_offline(prev)


def require_online(what: str) -> None:
    if _offline:
        raise OfflineError(f"{what} cannot be constructed in offline mode")


def make_session(pool_size: int = 8):
    import requests
    from requests.adapters import HTTPAdapter

    session = requests.Session()
    adapter = HTTPAdapter(pool_connections=pool_size, pool_maxsize=pool_size, max_retries=0)
    session.mount("http://", adapter)
    session.mount("https://", adapter)
    return session


_SECRET = re.compile(r"(?i)(bearer\s+)[^\s\"']+")


def redact(text: str, *secrets: str | None) -> str:
    for s in secrets:
        if s:
            text = text.replace(s, "***")
    return _SECRET.sub(r"\1***", text)
