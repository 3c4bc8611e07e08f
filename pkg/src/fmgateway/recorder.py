"""Black-box recorder: append-only, hash-chained audit log.

Every event is chained to its predecessor with SHA-256 over

    seq (8-byte big-endian) || timestamp_utc || location || actor || kind
        || payload_digest || prev_hash

where string fields are raw UTF-8 and payload_digest = SHA-256 of the
payload's canonical JSON bytes. Event 0 links to 32 zero bytes. A single
flipped byte in any stored field is therefore detectable, and verification
reports the lowest failing sequence number.

Storage is one append-only file of length-prefixed records: a 4-byte
big-endian length followed by the event's canonical JSON (hashes in
lowercase hex). The JSON Lines export is the same canonical JSON, one event
per LF-terminated line, re-importable byte-exactly.
"""

from __future__ import annotations

import os
import struct
import threading
from dataclasses import dataclass

from .canonical import canonical_json_bytes, sha256
from .clock import format_timestamp
from .errors import RangeError, StorageError

GENESIS_HASH = b"\x00" * 32

EVENT_KINDS = frozenset({
    "request_received",
    "guardrail_verdict",
    "risk_assessment",
    "rag_retrieval",
    "fm_call",
    "fm_response",
    "plan_created",
    "task_result",
    "verifier_submitted",
    "verifier_verdict",
    "response_delivered",
    "tool_refused_aibom",
    "config_loaded",
})


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp_utc: str
    location: str
    actor: str
    kind: str
    payload: dict
    payload_digest: bytes
    prev_hash: bytes
    hash: bytes

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp_utc": self.timestamp_utc,
            "location": self.location,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
            "payload_digest": self.payload_digest.hex(),
            "prev_hash": self.prev_hash.hex(),
            "hash": self.hash.hex(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AuditEvent":
        return cls(
            seq=raw["seq"],
            timestamp_utc=raw["timestamp_utc"],
            location=raw["location"],
            actor=raw["actor"],
            kind=raw["kind"],
            payload=raw["payload"],
            payload_digest=bytes.fromhex(raw["payload_digest"]),
            prev_hash=bytes.fromhex(raw["prev_hash"]),
            hash=bytes.fromhex(raw["hash"]),
        )


def event_hash(seq: int, timestamp_utc: str, location: str, actor: str, kind: str,
               payload_digest: bytes, prev_hash: bytes) -> bytes:
    preimage = (
        struct.pack(">Q", seq)
        + timestamp_utc.encode("utf-8")
        + location.encode("utf-8")
        + actor.encode("utf-8")
        + kind.encode("utf-8")
        + payload_digest
        + prev_hash
    )
    return sha256(preimage)


class MemoryAuditStore:
    """In-process store; same contract as the file store, no durability."""

    def __init__(self):
        self._events: list[AuditEvent] = []

    def append(self, event: AuditEvent) -> None:
        self._events.append(event)

    def events(self) -> list[AuditEvent]:
        return list(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def close(self) -> None:
        pass


class FileAuditStore:
    """Append-only file of length-prefixed canonical-JSON records.

    Appends are flushed and fsynced before returning so a crash never loses
    an acknowledged event. Existing records are loaded on open without
    verification; verification is the recorder's job.
    """

    def __init__(self, path: str, fsync: bool = True):
        self.path = path
        self._fsync = fsync
        self._events: list[AuditEvent] = []
        self._load_existing()
        self._fh = open(path, "ab")

    def _load_existing(self) -> None:
        if not os.path.exists(self.path):
            return
        import json

        with open(self.path, "rb") as fh:
            data = fh.read()
        offset = 0
        while offset < len(data):
            if offset + 4 > len(data):
                raise StorageError(f"truncated length prefix at byte {offset}")
            (length,) = struct.unpack(">I", data[offset:offset + 4])
            body = data[offset + 4:offset + 4 + length]
            if len(body) != length:
                raise StorageError(f"truncated record at byte {offset}")
            try:
                self._events.append(AuditEvent.from_dict(json.loads(body.decode("utf-8"))))
            except (ValueError, KeyError) as exc:
                raise StorageError(f"unreadable record at byte {offset}: {exc}") from exc
            offset += 4 + length

    def append(self, event: AuditEvent) -> None:
        body = canonical_json_bytes(event.to_dict())
        try:
            self._fh.write(struct.pack(">I", len(body)) + body)
            self._fh.flush()
            if self._fsync:
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise StorageError(f"audit append failed: {exc}") from exc
        self._events.append(event)

    def events(self) -> list[AuditEvent]:
        return list(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def close(self) -> None:
        self._fh.close()


class BlackBoxRecorder:
    """Single-writer recorder over an audit store.

    Appends are totally ordered through one lock; reads see a consistent
    prefix. If persistence fails the append raises StorageError and the
    triggering request must fail: no unrecorded actions.
    """

    def __init__(self, store, clock, location: str):
        self._store = store
        self._clock = clock
        self.location = location
        self._lock = threading.Lock()

    def append(self, actor: str, kind: str, payload: dict) -> AuditEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown audit event kind: {kind!r}")
        payload_bytes = canonical_json_bytes(payload)
        with self._lock:
            events = self._store.events()
            seq = len(events)
            prev_hash = events[-1].hash if events else GENESIS_HASH
            timestamp = format_timestamp(self._clock.now())
            payload_digest = sha256(payload_bytes)
            event = AuditEvent(
                seq=seq,
                timestamp_utc=timestamp,
                location=self.location,
                actor=actor,
                kind=kind,
                payload=payload,
                payload_digest=payload_digest,
                prev_hash=prev_hash,
                hash=event_hash(seq, timestamp, self.location, actor, kind, payload_digest, prev_hash),
            )
            self._store.append(event)
            return event

    def events(self) -> list[AuditEvent]:
        with self._lock:
            return self._store.events()

    def __len__(self) -> int:
        return len(self._store)

    def last_seq(self) -> int | None:
        n = len(self._store)
        return n - 1 if n else None

    def verify_chain(self, from_seq: int = 0, to_seq: int | None = None) -> int | None:
        """Recompute digests, hashes, and links over [from_seq, to_seq].

        Returns None when the range verifies, else the lowest failing seq.
        """
        events = self.events()
        if to_seq is None:
            to_seq = len(events) - 1
        if to_seq < from_seq:
            return None
        if from_seq < 0 or to_seq >= len(events):
            raise RangeError(f"range [{from_seq}, {to_seq}] does not exist in a log of {len(events)} events")
        return verify_events(events, from_seq, to_seq)

    def query(self, kind: str | None = None, actor: str | None = None,
              request_id: str | None = None, seq_min: int | None = None,
              seq_max: int | None = None) -> list[AuditEvent]:
        """Linear filter over the log, ascending seq."""
        out = []
        for ev in self.events():
            if kind is not None and ev.kind != kind:
                continue
            if actor is not None and ev.actor != actor:
                continue
            if request_id is not None and ev.payload.get("request_id") != request_id:
                continue
            if seq_min is not None and ev.seq < seq_min:
                continue
            if seq_max is not None and ev.seq > seq_max:
                continue
            out.append(ev)
        return out

    def export_jsonl(self, from_seq: int = 0, to_seq: int | None = None) -> bytes:
        events = self.events()
        if to_seq is None:
            to_seq = len(events) - 1
        if to_seq < from_seq:
            return b""
        if from_seq < 0 or to_seq >= len(events):
            raise RangeError(f"range [{from_seq}, {to_seq}] does not exist in a log of {len(events)} events")
        return b"".join(
            canonical_json_bytes(ev.to_dict()) + b"\n" for ev in events[from_seq:to_seq + 1]
        )

    def close(self) -> None:
        self._store.close()


def verify_events(events: list[AuditEvent], from_seq: int = 0, to_seq: int | None = None) -> int | None:
    """Chain verification over an in-memory event list; None means intact."""
    if to_seq is None:
        to_seq = len(events) - 1
    for i in range(from_seq, to_seq + 1):
        ev = events[i]
        if ev.seq != i:
            return i
        if sha256(canonical_json_bytes(ev.payload)) != ev.payload_digest:
            return i
        expected_prev = GENESIS_HASH if i == 0 else events[i - 1].hash
        if ev.prev_hash != expected_prev:
            return i
        recomputed = event_hash(ev.seq, ev.timestamp_utc, ev.location, ev.actor, ev.kind,
                                ev.payload_digest, ev.prev_hash)
        if recomputed != ev.hash:
            return i
    return None


def import_jsonl(data: bytes) -> list[AuditEvent]:
    """Parse a JSON Lines export back into events (inverse of export_jsonl)."""
    import json

    events = []
    for line in data.split(b"\n"):
        if not line:
            continue
        events.append(AuditEvent.from_dict(json.loads(line.decode("utf-8"))))
    return events
