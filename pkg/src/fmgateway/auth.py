"""API-key authentication, scopes, and per-key sliding-window quotas."""

from __future__ import annotations

import hmac
import threading
from collections import deque
from dataclasses import dataclass

from .errors import Forbidden, Unauthorized, ValidationError

SCOPES = ("complete", "ingest", "verify", "admin")


@dataclass(frozen=True)
class Principal:
    key_id: str
    display_name: str
    scopes: frozenset[str]
    quota_per_hour: int


class KeyTable:
    def __init__(self, entries: list[dict]):
        self._by_key: dict[str, Principal] = {}
        for entry in entries:
            scopes = frozenset(entry.get("scopes", []))
            if not scopes or not scopes.issubset(SCOPES):
                raise ValidationError(f"key {entry.get('key_id')!r}: scopes must be a non-empty subset of {SCOPES}")
            quota = entry.get("quota_per_hour", 1000)
            if not isinstance(quota, int) or quota < 1:
                raise ValidationError(f"key {entry.get('key_id')!r}: quota_per_hour must be a positive integer")
            principal = Principal(
                key_id=entry["key_id"],
                display_name=entry.get("display_name", entry["key_id"]),
                scopes=scopes,
                quota_per_hour=quota,
            )
            if entry["api_key"] in self._by_key:
                raise ValidationError("duplicate api_key in key table")
            self._by_key[entry["api_key"]] = principal

    def authenticate(self, api_key: str | None) -> Principal:
        """Constant-time comparison against every configured key."""
        if not api_key:
            raise Unauthorized("missing X-Api-Key header")
        matched: Principal | None = None
        key_bytes = api_key.encode("utf-8")
        for candidate, principal in self._by_key.items():
            if hmac.compare_digest(candidate.encode("utf-8"), key_bytes):
                matched = principal
        if matched is None:
            raise Unauthorized("unknown API key")
        return matched


def require_scope(principal: Principal, scope: str) -> None:
    if scope not in principal.scopes:
        raise Forbidden(f"key {principal.key_id!r} lacks scope {scope!r}")


class QuotaWindow:
    """Sliding-window admission counter per key.

    The window counts requests admitted to the pipeline (they terminate as
    delivered, rejected, or held); attempts bounced by auth or by the quota
    itself never consume quota.
    """

    def __init__(self, clock, window_s: int = 3600):
        self._clock = clock
        self.window_s = window_s
        self._admissions: dict[str, deque] = {}
        self._lock = threading.Lock()

    def count(self, key_id: str) -> int:
        cutoff = self._clock.now().timestamp() - self.window_s
        with self._lock:
            window = self._admissions.get(key_id)
            if window is None:
                return 0
            while window and window[0] <= cutoff:
                window.popleft()
            return len(window)

    def check(self, principal: Principal) -> bool:
        return self.count(principal.key_id) < principal.quota_per_hour

    def record(self, principal: Principal) -> None:
        with self._lock:
            self._admissions.setdefault(principal.key_id, deque()).append(
                self._clock.now().timestamp()
            )
