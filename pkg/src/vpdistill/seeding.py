"""Seed derivation.

Every random stream in the package is a ``random.Random`` seeded from a
stable hash of its identifying parts, so results never depend on call order
or on which worker thread ran a sample.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Return a 64-bit seed from an ordered tuple of identifying parts."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def make_rng(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))
