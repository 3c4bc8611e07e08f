"""Canonical JSON serialization.

Hashing and the round-trip contracts require a bit-exact byte form: keys
sorted lexicographically, no insignificant whitespace, UTF-8, and NaN/Inf
rejected. Every digest in the system is computed over this form.
"""

from __future__ import annotations

import hashlib
import json


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(
        obj,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def digest_of(obj) -> bytes:
    """SHA-256 of the canonical JSON form of ``obj``."""
    return sha256(canonical_json_bytes(obj))
