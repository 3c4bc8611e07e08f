"""HTTP/JSON face of the gateway.

Every endpoint authenticates via the ``X-Api-Key`` header and enforces a
scope; quota applies to completion traffic. Error bodies are uniform:
``{"error": {"code", "message", "request_id"?}}`` with the stable codes
defined by the inner modules. Any 4xx/5xx issued to an authenticated
principal is recorded in the audit log.
"""

from __future__ import annotations

import uuid
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .auth import Principal, require_scope
from .config import GatewayRuntime
from .errors import (
    AlreadyDecided,
    DuplicateAdapter,
    DuplicateDocId,
    DuplicateError,
    Expired,
    Forbidden,
    GatewayError,
    OversizeContent,
    ParseError,
    QuotaExceeded,
    RangeError,
    Unauthorized,
    UnknownFm,
    UnknownTask,
    UnregisteredArtifact,
    ValidationError,
)
from .orchestrator import PromptRequest
from .registry import aibom_record_from_dict
from .reporting import generate_report

_STATUS_BY_ERROR = {
    Unauthorized: 401,
    Forbidden: 403,
    QuotaExceeded: 429,
    UnknownTask: 404,
    UnknownFm: 404,
    AlreadyDecided: 409,
    Expired: 409,
    DuplicateError: 409,
    DuplicateDocId: 409,
    DuplicateAdapter: 409,
    ValidationError: 400,
    ParseError: 400,
    RangeError: 400,
    UnregisteredArtifact: 400,
    OversizeContent: 400,
}


class CompleteBody(BaseModel):
    template_id: str
    vars: dict[str, str] = Field(default_factory=dict)
    mode: str = "simple"
    context_window: int = 0
    request_id: str | None = None


class ContextEventBody(BaseModel):
    modality: str
    content: str


class DocumentBody(BaseModel):
    doc_id: str
    text: str
    source: str = ""
    store_id: str | None = None


class VerdictBody(BaseModel):
    verdict: str
    new_text: str | None = None
    reason: str | None = None


class CoversionBody(BaseModel):
    members: list[list[str]]


def _error_body(code: str, message: str, request_id: str | None = None) -> dict:
    body = {"error": {"code": code, "message": message}}
    if request_id is not None:
        body["error"]["request_id"] = request_id
    return body


def build_app(runtime: GatewayRuntime) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        runtime.close()

    app = FastAPI(title="fmgateway", lifespan=lifespan)

    def record_api_error(principal: Principal, code: str, http_status: int,
                         request_id: str | None = None) -> None:
        payload = {"type": "api_error", "code": code, "http_status": http_status,
                   "principal": principal.key_id}
        if request_id is not None:
            payload["request_id"] = request_id
        runtime.recorder.append(actor="gateway-api", kind="response_delivered", payload=payload)

    def authed(request: Request, scope: str) -> Principal:
        principal = runtime.keys.authenticate(request.headers.get("X-Api-Key"))
        request.state.principal = principal
        require_scope(principal, scope)
        return principal

    @app.exception_handler(GatewayError)
    async def on_gateway_error(request: Request, exc: GatewayError):
        status = _STATUS_BY_ERROR.get(type(exc), 500)
        principal = getattr(request.state, "principal", None)
        if principal is not None and status >= 400:
            record_api_error(principal, exc.code, status,
                             request_id=getattr(request.state, "request_id", None))
        return JSONResponse(status_code=status,
                            content=_error_body(exc.code, exc.message,
                                                getattr(request.state, "request_id", None)))

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content=_error_body("validation_error", str(exc.errors())))

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "location": runtime.config.location}

    # -- completion -------------------------------------------------------------

    @app.post("/v1/complete")
    async def complete(body: CompleteBody, request: Request):
        principal = authed(request, "complete")
        rid = body.request_id or uuid.uuid4().hex
        request.state.request_id = rid
        if not runtime.quota.check(principal):
            runtime.recorder.append(
                actor=principal.key_id,
                kind="request_received",
                payload={"type": "prompt", "request_id": rid, "principal": principal.key_id,
                         "mode": body.mode, "template_id": body.template_id,
                         "context_window": body.context_window},
            )
            runtime.recorder.append(
                actor="gateway-api",
                kind="response_delivered",
                payload={"type": "response", "request_id": rid, "status": "rejected",
                         "reason_code": "quota_exceeded"},
            )
            raise QuotaExceeded(f"hourly quota exhausted for key {principal.key_id!r}")
        runtime.quota.record(principal)
        result = runtime.orchestrator.handle_request(PromptRequest(
            request_id=rid,
            principal=principal.key_id,
            mode=body.mode,
            template_id=body.template_id,
            variables=body.vars,
            context_window=body.context_window,
        ))
        if result.status == "held":
            return JSONResponse(status_code=202,
                                content={"request_id": rid, "task_id": result.task_id})
        return result.to_dict()

    @app.get("/v1/complete/{request_id}")
    async def poll_complete(request_id: str, request: Request):
        authed(request, "complete")
        request.state.request_id = request_id
        result = runtime.orchestrator.get_result(request_id)
        if result is None:
            raise UnknownTask(f"no such request: {request_id!r}")
        return result.to_dict()

    # -- ingestion ----------------------------------------------------------------

    @app.post("/v1/context-events")
    async def post_context_event(body: ContextEventBody, request: Request):
        principal = authed(request, "ingest")
        try:
            event = runtime.orchestrator.ingest_context_event(
                principal.key_id, body.modality, body.content)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        return {"event_id": event.event_id, "received_at": event.received_at}

    @app.post("/v1/documents")
    async def post_document(body: DocumentBody, request: Request):
        authed(request, "ingest")
        if not runtime.rag_stores:
            raise ValidationError("no RAG store configured")
        if body.store_id is None:
            store = runtime.rag_stores[0]
        else:
            matches = [s for s in runtime.rag_stores if s.store_id == body.store_id]
            if not matches:
                raise ValidationError(f"unknown RAG store: {body.store_id!r}")
            store = matches[0]
        doc = store.add_document(body.doc_id, body.text, body.source)
        return {"doc_id": doc.doc_id, "store_id": store.store_id}

    # -- verifier --------------------------------------------------------------------

    @app.get("/v1/verifier/pending")
    async def verifier_pending(request: Request, limit: int = 50):
        authed(request, "verify")
        runtime.orchestrator.expire_overdue()
        tasks = runtime.verifier_queue.poll_pending(limit=limit)
        return {"tasks": [t.to_payload() for t in tasks]}

    @app.post("/v1/verifier/{task_id}/verdict")
    async def verifier_verdict(task_id: str, body: VerdictBody, request: Request):
        principal = authed(request, "verify")
        try:
            task = runtime.orchestrator.apply_verdict(
                task_id, body.verdict, principal.key_id,
                new_text=body.new_text, reason=body.reason)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        return task.to_payload()

    # -- audit ------------------------------------------------------------------------

    @app.get("/v1/audit")
    async def audit_query(request: Request, kind: str | None = None, actor: str | None = None,
                          request_id: str | None = None, seq_min: int | None = None,
                          seq_max: int | None = None, limit: int = 100, offset: int = 0):
        authed(request, "admin")
        events = runtime.recorder.query(kind=kind, actor=actor, request_id=request_id,
                                        seq_min=seq_min, seq_max=seq_max)
        page = events[offset:offset + limit]
        return {"total": len(events), "events": [ev.to_dict() for ev in page]}

    @app.get("/v1/audit/verify")
    async def audit_verify(request: Request):
        authed(request, "admin")
        bad = runtime.recorder.verify_chain()
        return {"ok": bad is None, "first_bad_seq": bad, "events": len(runtime.recorder)}

    @app.get("/v1/audit/export")
    async def audit_export(request: Request, from_seq: int = 0, to_seq: int | None = None):
        authed(request, "admin")
        data = runtime.recorder.export_jsonl(from_seq=from_seq, to_seq=to_seq)
        return Response(content=data, media_type="application/x-ndjson")

    # -- supply chain --------------------------------------------------------------------

    @app.post("/v1/aibom")
    async def post_aibom(request: Request):
        authed(request, "admin")
        raw = await request.json()
        record = aibom_record_from_dict(raw)
        digest = runtime.aibom.register_aibom(record)
        return {"component_id": record.component_id, "version": record.version,
                "digest": digest.hex()}

    @app.get("/v1/aibom/{component_id}/{version}")
    async def get_aibom(component_id: str, version: str, request: Request):
        authed(request, "admin")
        record = runtime.aibom.lookup(component_id, version)
        if record is None:
            raise UnknownTask(f"no AIBOM record for ({component_id}, {version})")
        doc = record.to_document()
        doc["document_digest"] = record.digest().hex()
        return doc

    @app.post("/v1/coversion")
    async def post_coversion(body: CoversionBody, request: Request):
        authed(request, "admin")
        members = []
        for pair in body.members:
            if len(pair) != 2:
                raise ValidationError("co-version members must be [artifact_id, version] pairs")
            members.append((pair[0], pair[1]))
        entry = runtime.aibom.record_coversion(members)
        return entry.to_dict()

    @app.get("/v1/coversion/{artifact_id}/{version}")
    async def get_coversion(artifact_id: str, version: str, request: Request):
        authed(request, "admin")
        companions = runtime.aibom.resolve_coversion(artifact_id, version)
        return {"companions": [[aid, ver] for aid, ver in companions]}

    # -- reporting ----------------------------------------------------------------------

    @app.get("/v1/report")
    async def report(request: Request, start: str, end: str):
        authed(request, "admin")
        result = generate_report(runtime.recorder, start, end, runtime.clock,
                                 process_notes=runtime.config.report_notes)
        return result.to_dict()

    return app
