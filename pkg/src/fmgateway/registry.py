"""Supply-chain registries: AIBOM records and co-versioned artifact tuples.

Both stores are append-only: a record is never mutated, and version
matching is exact-string -- semver ranges invite silent drift in a
governance artifact. Tool/plugin use anywhere in the gateway must pass
``enforce``; a refusal is itself an auditable event.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .canonical import canonical_json_bytes, sha256
from .clock import format_timestamp
from .errors import DuplicateError, UnregisteredArtifact, ValidationError

COMPONENT_TYPES = ("fm", "dataset", "tool", "plugin")


@dataclass(frozen=True)
class AibomRecord:
    component_id: str
    version: str
    supplier: str
    component_type: str
    subcomponents: tuple[tuple[str, str], ...] = field(default=())
    rai_metrics: dict[str, float] = field(default_factory=dict)

    def to_document(self) -> dict:
        """Canonical registry document; the digest is computed over this."""
        return {
            "component_id": self.component_id,
            "version": self.version,
            "supplier": self.supplier,
            "component_type": self.component_type,
            "subcomponents": [[cid, ver] for cid, ver in self.subcomponents],
            "rai_metrics": dict(self.rai_metrics),
        }

    def digest(self) -> bytes:
        return sha256(canonical_json_bytes(self.to_document()))


def aibom_record_from_dict(raw: dict) -> AibomRecord:
    if not isinstance(raw, dict):
        raise ValidationError("AIBOM record must be an object")
    allowed = {"component_id", "version", "supplier", "component_type", "subcomponents", "rai_metrics"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValidationError(f"unknown AIBOM field {sorted(unknown)[0]!r}")
    for key in ("component_id", "version", "supplier"):
        if not isinstance(raw.get(key), str) or not raw[key]:
            raise ValidationError(f"AIBOM {key} must be a non-empty string")
    if raw.get("component_type") not in COMPONENT_TYPES:
        raise ValidationError(f"AIBOM component_type must be one of {COMPONENT_TYPES}")
    subs = raw.get("subcomponents", [])
    if not isinstance(subs, list):
        raise ValidationError("AIBOM subcomponents must be a list of [component_id, version] pairs")
    parsed_subs = []
    for item in subs:
        if (not isinstance(item, (list, tuple)) or len(item) != 2
                or not all(isinstance(x, str) and x for x in item)):
            raise ValidationError("AIBOM subcomponents must be a list of [component_id, version] pairs")
        parsed_subs.append((item[0], item[1]))
    metrics = raw.get("rai_metrics", {})
    if not isinstance(metrics, dict) or not all(
        isinstance(k, str) and isinstance(v, (int, float)) and not isinstance(v, bool)
        for k, v in metrics.items()
    ):
        raise ValidationError("AIBOM rai_metrics must map strings to numbers")
    return AibomRecord(
        component_id=raw["component_id"],
        version=raw["version"],
        supplier=raw["supplier"],
        component_type=raw["component_type"],
        subcomponents=tuple(parsed_subs),
        rai_metrics={k: float(v) for k, v in metrics.items()},
    )


@dataclass(frozen=True)
class CoVersionEntry:
    tuple_members: tuple[tuple[str, str], ...]
    recorded_at: str
    index: int

    def to_dict(self) -> dict:
        return {
            "tuple": [[aid, ver] for aid, ver in self.tuple_members],
            "recorded_at": self.recorded_at,
        }


class AibomRegistry:
    def __init__(self, recorder, clock):
        self._recorder = recorder
        self._clock = clock
        self._records: dict[tuple[str, str], AibomRecord] = {}
        self._coversions: list[CoVersionEntry] = []
        self._lock = threading.Lock()

    def register_aibom(self, record: AibomRecord) -> bytes:
        """Store a record and return its digest; duplicates are refused."""
        digest = record.digest()
        with self._lock:
            key = (record.component_id, record.version)
            if key in self._records:
                raise DuplicateError(f"AIBOM record already registered: {key}")
            self._records[key] = record
        self._recorder.append(
            actor="registry",
            kind="config_loaded",
            payload={
                "type": "aibom_registered",
                "component_id": record.component_id,
                "version": record.version,
                "digest": digest.hex(),
            },
        )
        return digest

    def lookup(self, component_id: str, version: str) -> AibomRecord | None:
        with self._lock:
            return self._records.get((component_id, version))

    def enforce(self, component_id: str, version: str, request_id: str | None = None) -> bool:
        """True iff a record exists for the exact (id, version).

        A refusal emits a tool_refused_aibom event so blocked tool use is
        visible to auditors.
        """
        with self._lock:
            allowed = (component_id, version) in self._records
        if not allowed:
            payload = {"type": "aibom_refusal", "component_id": component_id, "version": version}
            if request_id is not None:
                payload["request_id"] = request_id
            self._recorder.append(actor="registry", kind="tool_refused_aibom", payload=payload)
        return allowed

    def record_coversion(self, members) -> CoVersionEntry:
        """Bind a tuple of (artifact_id, version) pairs as compatible."""
        members = tuple((str(a), str(v)) for a, v in members)
        if len(members) < 2:
            raise ValidationError("co-version tuple needs at least 2 members")
        ids = [aid for aid, _ in members]
        if len(ids) != len(set(ids)):
            raise ValidationError("artifact ids within a co-version tuple must be distinct")
        with self._lock:
            for aid, ver in members:
                if (aid, ver) not in self._records:
                    raise UnregisteredArtifact(f"co-version member not in AIBOM registry: ({aid}, {ver})")
            entry = CoVersionEntry(
                tuple_members=members,
                recorded_at=format_timestamp(self._clock.now()),
                index=len(self._coversions),
            )
            self._coversions.append(entry)
        return entry

    def resolve_coversion(self, artifact_id: str, version: str) -> list[tuple[str, str]]:
        """Companions from the latest tuple containing (artifact_id, version)."""
        with self._lock:
            latest = None
            for entry in self._coversions:
                if (artifact_id, version) in entry.tuple_members:
                    latest = entry
            if latest is None:
                return []
            return [(aid, ver) for aid, ver in latest.tuple_members if (aid, ver) != (artifact_id, version)]

    def coversion_entries(self) -> list[CoVersionEntry]:
        with self._lock:
            return list(self._coversions)
