"""Adapter layer: one invocation contract over heterogeneous FM backends.

Backends plug in behind a uniform ``complete(prompt) -> text`` surface so a
backend swap never touches the pipeline. Registration requires the backend
to pass AIBOM enforcement; a declared-but-unregistered backend stays in the
catalog so capability routing can name it and refuse it at the point of use.

Every invocation is bracketed by fm_call / fm_response audit events. Audit
payloads store text post-PII-redaction only; the raw text flows onward in
the pipeline where the guardrail stages handle it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import httpx

from . import guardrails
from .errors import (
    AibomRefused,
    BackendError,
    DuplicateAdapter,
    GuardrailAbort,
    Timeout,
    UnknownFm,
)
from .policy import FmDescriptor, Policy


@dataclass(frozen=True)
class FmRequest:
    prompt: str
    max_output_chars: int
    request_id: str


@dataclass(frozen=True)
class FmResponse:
    text: str
    fm_id: str
    latency_ms: int
    truncated: bool


@dataclass(frozen=True)
class AdapterRegistration:
    fm_id: str
    capabilities: frozenset[str]
    descriptor: FmDescriptor


class EchoBackend:
    def complete(self, prompt: str) -> str:
        return prompt


class ScriptedBackend:
    """Deterministic table lookup; unknown prompts get a fixed fallback."""

    FALLBACK = "UNSCRIPTED"

    def __init__(self, script: dict[str, str] | None = None):
        self.script = dict(script or {})

    def complete(self, prompt: str) -> str:
        return self.script.get(prompt, self.FALLBACK)


class FailingBackend:
    def complete(self, prompt: str) -> str:
        raise BackendError("backend configured to fail")


class HttpBackend:
    """POST {prompt, max_output_chars} as JSON, expect {text} back."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0, retries: int = 0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.retries = retries
        self._max_output_chars = 0

    def bind_request(self, request: FmRequest) -> None:
        self._max_output_chars = request.max_output_chars

    def complete(self, prompt: str) -> str:
        attempts = self.retries + 1
        last_exc: Exception | None = None
        for _ in range(attempts):
            try:
                resp = httpx.post(
                    self.endpoint,
                    json={"prompt": prompt, "max_output_chars": self._max_output_chars},
                    timeout=self.timeout_s,
                )
            except httpx.TimeoutException as exc:
                raise Timeout(f"FM endpoint timed out: {self.endpoint}") from exc
            except httpx.HTTPError as exc:
                last_exc = exc
                continue
            if resp.status_code != 200:
                raise BackendError(f"FM endpoint returned {resp.status_code}")
            try:
                text = resp.json()["text"]
            except (ValueError, KeyError) as exc:
                raise BackendError(f"FM endpoint returned malformed body: {exc}") from exc
            if not isinstance(text, str):
                raise BackendError("FM endpoint 'text' field is not a string")
            return text
        raise BackendError(f"FM endpoint unreachable: {last_exc}")


def _build_backend(descriptor: FmDescriptor, script: dict[str, str] | None,
                   http_timeout_s: float, http_retries: int):
    if descriptor.adapter_kind == "echo":
        return EchoBackend()
    if descriptor.adapter_kind == "scripted":
        return ScriptedBackend(script)
    if descriptor.adapter_kind == "failing":
        return FailingBackend()
    if descriptor.adapter_kind == "http":
        if not descriptor.endpoint:
            raise ValueError(f"http adapter {descriptor.id!r} needs an endpoint")
        return HttpBackend(descriptor.endpoint, timeout_s=http_timeout_s, retries=http_retries)
    raise ValueError(f"unknown adapter kind: {descriptor.adapter_kind!r}")


class AdapterRegistry:
    """Registered (active) adapters plus a catalog of declared backends.

    The catalog lets capability routing resolve to a known backend whose
    AIBOM registration is missing, so the refusal happens (and is recorded)
    at the point of use instead of silently falling through.
    """

    def __init__(self, recorder, aibom_registry, clock,
                 http_timeout_s: float = 10.0, http_retries: int = 0):
        self._recorder = recorder
        self._aibom = aibom_registry
        self._clock = clock
        self._http_timeout_s = http_timeout_s
        self._http_retries = http_retries
        self._catalog: dict[str, FmDescriptor] = {}
        self._scripts: dict[str, dict[str, str] | None] = {}
        self._active: dict[str, tuple[AdapterRegistration, object]] = {}
        self._lock = threading.Lock()

    # -- catalog -------------------------------------------------------------

    def declare_backend(self, descriptor: FmDescriptor, script: dict[str, str] | None = None) -> None:
        with self._lock:
            self._catalog[descriptor.id] = descriptor
            self._scripts[descriptor.id] = script

    def catalog_resolve(self, capability: str) -> FmDescriptor | None:
        """Declared backend for a capability; lexicographic fm_id tie-break."""
        with self._lock:
            matches = sorted(d.id for d in self._catalog.values() if capability in d.capabilities)
        return self._catalog[matches[0]] if matches else None

    # -- registration ----------------------------------------------------------

    def register_adapter(self, descriptor: FmDescriptor, script: dict[str, str] | None = None) -> AdapterRegistration:
        if not self._aibom.enforce(descriptor.id, descriptor.model_version):
            raise AibomRefused(
                f"adapter {descriptor.id!r} v{descriptor.model_version} has no AIBOM record"
            )
        with self._lock:
            if descriptor.id in self._active:
                raise DuplicateAdapter(f"adapter already registered: {descriptor.id!r}")
            backend = _build_backend(descriptor, script, self._http_timeout_s, self._http_retries)
            registration = AdapterRegistration(
                fm_id=descriptor.id, capabilities=descriptor.capabilities, descriptor=descriptor
            )
            self._active[descriptor.id] = (registration, backend)
            self._catalog[descriptor.id] = descriptor
            self._scripts[descriptor.id] = script
        return registration

    def is_registered(self, fm_id: str) -> bool:
        return fm_id in self._active

    def registered_ids(self) -> set[str]:
        return set(self._active)

    def resolve_capability(self, capability: str) -> str | None:
        """Active adapter for a capability; lexicographic fm_id tie-break."""
        with self._lock:
            matches = sorted(
                fm_id for fm_id, (reg, _) in self._active.items() if capability in reg.capabilities
            )
        return matches[0] if matches else None

    def descriptor(self, fm_id: str) -> FmDescriptor | None:
        entry = self._active.get(fm_id)
        return entry[0].descriptor if entry else None

    # -- invocation --------------------------------------------------------------

    def _audit_text(self, text: str, pii_patterns) -> str:
        if not pii_patterns:
            return text
        redacted, _ = guardrails.redact_pii(text, pii_patterns)
        return redacted

    def invoke(self, fm_id: str, request: FmRequest, pii_patterns=()) -> FmResponse:
        """Dispatch one completion; fm_call precedes dispatch, fm_response
        always follows (with the error on the failure path)."""
        entry = self._active.get(fm_id)
        if entry is None:
            raise UnknownFm(f"no registered adapter: {fm_id!r}")
        _, backend = entry
        self._recorder.append(
            actor="fm-adapters",
            kind="fm_call",
            payload={
                "request_id": request.request_id,
                "fm_id": fm_id,
                "prompt": self._audit_text(request.prompt, pii_patterns),
                "max_output_chars": request.max_output_chars,
            },
        )
        started = self._clock.now()
        if isinstance(backend, HttpBackend):
            backend.bind_request(request)
        try:
            text = backend.complete(request.prompt)
        except Exception as exc:
            latency_ms = max(0, int((self._clock.now() - started).total_seconds() * 1000))
            code = exc.code if hasattr(exc, "code") else "backend_error"
            self._recorder.append(
                actor="fm-adapters",
                kind="fm_response",
                payload={
                    "request_id": request.request_id,
                    "fm_id": fm_id,
                    "error": code,
                    "message": str(exc),
                    "latency_ms": latency_ms,
                },
            )
            if isinstance(exc, (BackendError, Timeout)):
                raise
            raise BackendError(f"adapter {fm_id!r} failed: {exc}") from exc
        latency_ms = max(0, int((self._clock.now() - started).total_seconds() * 1000))
        truncated = len(text) > request.max_output_chars
        if truncated:
            text = text[: request.max_output_chars]
        self._recorder.append(
            actor="fm-adapters",
            kind="fm_response",
            payload={
                "request_id": request.request_id,
                "fm_id": fm_id,
                "text": self._audit_text(text, pii_patterns),
                "latency_ms": latency_ms,
                "truncated": truncated,
            },
        )
        return FmResponse(text=text, fm_id=fm_id, latency_ms=latency_ms, truncated=truncated)

    def chain_invoke(self, route, request: FmRequest, policy: Policy) -> tuple[FmResponse, list[FmResponse]]:
        """Pipe output to input along ``route``; mid-stage guardrails check
        every intermediate text and a reject aborts the chain."""
        route = list(route)
        if not route:
            raise ValueError("route must contain at least one fm_id")
        for fm_id in route:
            if fm_id not in self._active:
                raise UnknownFm(f"no registered adapter: {fm_id!r}")
        intermediates: list[FmResponse] = []
        prompt = request.prompt
        response: FmResponse | None = None
        for step, fm_id in enumerate(route):
            response = self.invoke(
                fm_id,
                FmRequest(prompt=prompt, max_output_chars=request.max_output_chars,
                          request_id=request.request_id),
                pii_patterns=policy.pii_patterns,
            )
            if step == len(route) - 1:
                break
            verdict = guardrails.evaluate(guardrails.STAGE_MID, response.text, policy)
            self._recorder.append(
                actor="guardrail-engine",
                kind="guardrail_verdict",
                payload={"request_id": request.request_id, "stage": guardrails.STAGE_MID,
                         "step": step, **verdict.to_payload()},
            )
            if verdict.decision == guardrails.DECISION_REJECT:
                raise GuardrailAbort(step, verdict.reason_code)
            text = verdict.output_text
            response = FmResponse(text=text, fm_id=response.fm_id,
                                  latency_ms=response.latency_ms, truncated=response.truncated)
            intermediates.append(response)
            prompt = text
        assert response is not None
        return response, intermediates
