"""Gateway configuration file and runtime assembly.

The config JSON names the policy file, audit store, RAG stores, API keys,
FM backends, and AIBOM documents. ``build_runtime`` wires the whole stack
in supply-chain order: AIBOM records first, then adapters (which must pass
enforcement), then the policy (whose fm_route must resolve against the
registered adapters).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

from .adapters import AdapterRegistry
from .auth import KeyTable, QuotaWindow
from .clock import SystemClock
from .errors import AibomRefused, ParseError, ValidationError
from .orchestrator import Orchestrator
from .policy import ADAPTER_KINDS, FmDescriptor, Policy, load_policy
from .rag import VectorStore
from .recorder import BlackBoxRecorder, FileAuditStore, MemoryAuditStore
from .registry import AibomRegistry, aibom_record_from_dict
from .verifier import VerifierQueue

logger = logging.getLogger("fmgateway")


@dataclass
class GatewayConfig:
    location: str
    policy_path: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    audit_store_path: str | None = None
    rag_stores: list[dict] = field(default_factory=list)
    api_keys: list[dict] = field(default_factory=list)
    aibom_documents: list[dict] = field(default_factory=list)
    fm_backends: list[dict] = field(default_factory=list)
    report_notes: str = ""
    max_output_chars: int = 4096

    @classmethod
    def from_file(cls, path: str) -> "GatewayConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ParseError(f"cannot read config {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed config JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ParseError("config must be a JSON object")
        known = {
            "location", "policy_path", "listen_host", "listen_port", "audit_store_path",
            "rag_stores", "api_keys", "aibom_documents", "fm_backends", "report_notes",
            "max_output_chars",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config key {sorted(unknown)[0]!r}")
        for key in ("location", "policy_path"):
            if not isinstance(raw.get(key), str) or not raw[key]:
                raise ValidationError(f"config {key} must be a non-empty string")
        base = os.path.dirname(os.path.abspath(path))
        cfg = cls(location=raw["location"], policy_path=_resolve(base, raw["policy_path"]))
        cfg.listen_host = raw.get("listen_host", cfg.listen_host)
        cfg.listen_port = raw.get("listen_port", cfg.listen_port)
        if raw.get("audit_store_path"):
            cfg.audit_store_path = _resolve(base, raw["audit_store_path"])
        cfg.rag_stores = [
            {"store_id": s["store_id"], "path": _resolve(base, s["path"])}
            for s in raw.get("rag_stores", [])
        ]
        cfg.api_keys = raw.get("api_keys", [])
        cfg.aibom_documents = raw.get("aibom_documents", [])
        cfg.fm_backends = raw.get("fm_backends", [])
        cfg.report_notes = raw.get("report_notes", "")
        cfg.max_output_chars = raw.get("max_output_chars", 4096)
        return cfg


def _resolve(base: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base, path)


def descriptor_from_dict(raw: dict) -> tuple[FmDescriptor, dict[str, str] | None]:
    known = {"id", "fm_type", "capabilities", "adapter_kind", "model_version", "endpoint", "script"}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown fm backend key {sorted(unknown)[0]!r}")
    if not isinstance(raw.get("id"), str) or not raw["id"]:
        raise ValidationError("fm backend id must be a non-empty string")
    fm_type = raw.get("fm_type", 1)
    if fm_type not in (1, 2, 3, 4):
        raise ValidationError("fm_type must be 1..4")
    capabilities = raw.get("capabilities", [])
    if not isinstance(capabilities, list) or not capabilities:
        raise ValidationError("fm backend capabilities must be a non-empty list")
    kind = raw.get("adapter_kind")
    if kind not in ADAPTER_KINDS:
        raise ValidationError(f"adapter_kind must be one of {ADAPTER_KINDS}")
    endpoint = raw.get("endpoint")
    if kind == "http" and not endpoint:
        raise ValidationError("http adapters require an endpoint")
    if kind != "http" and endpoint:
        raise ValidationError("endpoint is only valid for http adapters")
    version = raw.get("model_version", "1")
    if not isinstance(version, str) or not version:
        raise ValidationError("model_version must be a non-empty string")
    descriptor = FmDescriptor(
        id=raw["id"], fm_type=fm_type, capabilities=frozenset(capabilities),
        adapter_kind=kind, model_version=version, endpoint=endpoint,
    )
    script = raw.get("script")
    if script is not None and not isinstance(script, dict):
        raise ValidationError("script must be a prompt->text object")
    return descriptor, script


@dataclass
class GatewayRuntime:
    config: GatewayConfig
    clock: object
    recorder: BlackBoxRecorder
    aibom: AibomRegistry
    adapters: AdapterRegistry
    rag_stores: list[VectorStore]
    verifier_queue: VerifierQueue
    orchestrator: Orchestrator
    keys: KeyTable
    quota: QuotaWindow
    policy: Policy

    def close(self) -> None:
        self.recorder.close()


def build_runtime(config: GatewayConfig, clock=None) -> GatewayRuntime:
    clock = clock or SystemClock()
    store = FileAuditStore(config.audit_store_path) if config.audit_store_path else MemoryAuditStore()
    recorder = BlackBoxRecorder(store, clock, location=config.location)
    aibom = AibomRegistry(recorder, clock)
    for doc in config.aibom_documents:
        aibom.register_aibom(aibom_record_from_dict(doc))

    adapters = AdapterRegistry(recorder, aibom, clock)
    for raw in config.fm_backends:
        descriptor, script = descriptor_from_dict(raw)
        adapters.declare_backend(descriptor, script)
        try:
            adapters.register_adapter(descriptor, script)
        except AibomRefused:
            logger.warning("backend %s declared but refused: no AIBOM record", descriptor.id)

    with open(config.policy_path, "rb") as fh:
        policy = load_policy(fh.read(), adapter_ids=adapters.registered_ids())
    recorder.append(
        actor="policy-model",
        kind="config_loaded",
        payload={"type": "policy_loaded", "policy_id": policy.id, "version": policy.version},
    )

    rag_stores = []
    for spec in config.rag_stores:
        if os.path.exists(spec["path"]):
            rag_stores.append(VectorStore.load_jsonl(spec["path"], store_id=spec["store_id"]))
        else:
            rag_stores.append(VectorStore(store_id=spec["store_id"]))

    queue = VerifierQueue(recorder, clock)
    orchestrator = Orchestrator(
        policy=policy, recorder=recorder, adapters=adapters, aibom=aibom,
        verifier_queue=queue, clock=clock, rag_stores=rag_stores,
        max_output_chars=config.max_output_chars,
    )
    keys = KeyTable(config.api_keys)
    quota = QuotaWindow(clock)
    return GatewayRuntime(
        config=config, clock=clock, recorder=recorder, aibom=aibom, adapters=adapters,
        rag_stores=rag_stores, verifier_queue=queue, orchestrator=orchestrator,
        keys=keys, quota=quota, policy=policy,
    )
