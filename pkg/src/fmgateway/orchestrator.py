"""Request pipeline and agent layer.

Every completion request flows through one fixed sequence: template
rendering (with recent context events), pre-stage guardrails, risk
assessment, optional retrieval, FM invocation (single, chained, or a
planned task DAG for goal requests), post-stage guardrails, and the
verifier gate. Each step lands in the recorder; the think-aloud trace is
assembled from the request's own audit events, so disclosure can never
change what was recorded.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

from . import guardrails, risk
from .adapters import AdapterRegistry, FmRequest
from .clock import format_timestamp
from .errors import (
    BackendError,
    CyclicPlanError,
    Expired,
    ExtraVariable,
    GuardrailAbort,
    MissingVariable,
    OversizeContent,
    PlanParseError,
    StorageError,
    Timeout,
    UnknownFm,
    UnroutableCapability,
)
from .policy import Policy, render_prompt
from .rag import VectorStore, federated_retrieve
from .verifier import (
    GATE_DELIVER,
    GATE_HOLD,
    REASON_HUMAN_REJECT,
    REASON_TIMEOUT,
    STATUS_APPROVED,
    STATUS_EDITED,
    STATUS_EXPIRED,
    VERDICT_APPROVE,
    VERDICT_EDIT,
    VERDICT_REJECT,
    VerificationTask,
    VerifierQueue,
)

MODES = ("simple", "goal")
CONTEXT_MODALITIES = ("text_note", "click", "annotation", "typing")
MAX_CONTEXT_CHARS = 4096

STATUS_OK = "ok"
STATUS_REJECTED = "rejected"
STATUS_HELD = "held"

_COMPONENT_BY_KIND = {
    "request_received": "gateway-api",
    "guardrail_verdict": "guardrail-engine",
    "risk_assessment": "risk-assessor",
    "rag_retrieval": "rag-store",
    "fm_call": "fm-adapters",
    "fm_response": "fm-adapters",
    "plan_created": "orchestrator",
    "task_result": "orchestrator",
    "verifier_submitted": "verifier",
    "verifier_verdict": "verifier",
    "response_delivered": "gateway-api",
    "tool_refused_aibom": "registry",
    "config_loaded": "policy-model",
}

PLANNING_PROMPT_PREFIX = (
    "Decompose the goal into tasks. Respond with only a JSON array of objects, "
    "each with keys task_id, description, depends_on, capability.\nGoal: "
)


def build_planning_prompt(goal_text: str) -> str:
    return PLANNING_PROMPT_PREFIX + goal_text


@dataclass(frozen=True)
class PromptRequest:
    request_id: str
    principal: str
    mode: str
    template_id: str
    variables: dict[str, str] = field(default_factory=dict)
    context_window: int = 0


@dataclass(frozen=True)
class ContextEvent:
    event_id: str
    principal: str
    modality: str
    content: str
    received_at: str


@dataclass(frozen=True)
class PlannedTask:
    task_id: str
    description: str
    depends_on: tuple[str, ...]
    capability: str

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "description": self.description,
            "depends_on": list(self.depends_on),
            "capability": self.capability,
        }


@dataclass(frozen=True)
class TaskPlan:
    tasks: tuple[PlannedTask, ...]

    def sink_ids(self) -> list[str]:
        referenced = {dep for t in self.tasks for dep in t.depends_on}
        return sorted(t.task_id for t in self.tasks if t.task_id not in referenced)


@dataclass(frozen=True)
class TraceStep:
    step_no: int
    component: str
    summary: str
    audit_seq: int

    def to_dict(self) -> dict:
        return {
            "step_no": self.step_no,
            "component": self.component,
            "summary": self.summary,
            "audit_seq": self.audit_seq,
        }


@dataclass(frozen=True)
class GatewayResponse:
    request_id: str
    status: str
    text: str | None = None
    reason_code: str | None = None
    trace: tuple[TraceStep, ...] | None = None
    task_id: str | None = None

    def to_dict(self) -> dict:
        out = {
            "request_id": self.request_id,
            "status": self.status,
            "text": self.text,
            "reason_code": self.reason_code,
        }
        if self.task_id is not None:
            out["task_id"] = self.task_id
        if self.trace is not None:
            out["trace"] = [s.to_dict() for s in self.trace]
        return out


def _step_summary(kind: str, payload: dict) -> str:
    if kind == "request_received":
        if payload.get("type") == "context_event":
            return f"context event ({payload.get('modality')})"
        return f"request received (mode={payload.get('mode')})"
    if kind == "guardrail_verdict":
        base = f"guardrail {payload.get('stage')}: {payload.get('decision')}"
        return base + (f" ({payload['reason_code']})" if payload.get("reason_code") else "")
    if kind == "risk_assessment":
        return f"risk score {payload.get('score', 0):.2f}: {payload.get('decision')}"
    if kind == "rag_retrieval":
        return f"retrieved {len(payload.get('chunks', []))} reference chunks"
    if kind == "fm_call":
        return f"calling {payload.get('fm_id')}"
    if kind == "fm_response":
        if "error" in payload:
            return f"{payload.get('fm_id')} failed ({payload['error']})"
        return f"{payload.get('fm_id')} responded"
    if kind == "plan_created":
        return f"plan created with {len(payload.get('tasks', []))} tasks"
    if kind == "task_result":
        return f"task {payload.get('task_id')} completed"
    if kind == "verifier_submitted":
        return "held for human verification"
    if kind == "verifier_verdict":
        return f"verifier verdict: {payload.get('status')}"
    if kind == "response_delivered":
        base = f"response {payload.get('status')}"
        return base + (f" ({payload['reason_code']})" if payload.get("reason_code") else "")
    if kind == "tool_refused_aibom":
        return f"tool {payload.get('component_id')} refused: no AIBOM record"
    if kind == "config_loaded":
        return "configuration loaded"
    return kind


class ContextStore:
    """Per-principal context events in arrival order."""

    def __init__(self):
        self._events: dict[str, list[ContextEvent]] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def add(self, principal: str, modality: str, content: str, received_at: str) -> ContextEvent:
        with self._lock:
            self._counter += 1
            event = ContextEvent(
                event_id=f"ce-{self._counter:06d}",
                principal=principal,
                modality=modality,
                content=content,
                received_at=received_at,
            )
            self._events.setdefault(principal, []).append(event)
            return event

    def last(self, principal: str, n: int) -> list[ContextEvent]:
        if n <= 0:
            return []
        events = self._events.get(principal, [])
        return events[-n:]


class Orchestrator:
    def __init__(self, policy: Policy, recorder, adapters: AdapterRegistry, aibom,
                 verifier_queue: VerifierQueue, clock,
                 rag_stores: list[VectorStore] | None = None,
                 max_output_chars: int = 4096):
        self._policy = policy
        self._recorder = recorder
        self._adapters = adapters
        self._aibom = aibom
        self._queue = verifier_queue
        self._clock = clock
        self._rag_stores = list(rag_stores or [])
        self._max_output_chars = max_output_chars
        self.context = ContextStore()
        self._results: dict[str, GatewayResponse] = {}
        self._held: dict[str, str] = {}
        self._task_request: dict[str, str] = {}
        self._seen_ids: set[str] = set()
        self._lock = threading.Lock()

    @property
    def policy(self) -> Policy:
        return self._policy

    def replace_policy(self, policy: Policy) -> None:
        self._policy = policy

    # -- context ingestion ------------------------------------------------------

    def ingest_context_event(self, principal: str, modality: str, content: str) -> ContextEvent:
        if modality not in CONTEXT_MODALITIES:
            raise ValueError(f"unknown context modality: {modality!r}")
        if len(content) > MAX_CONTEXT_CHARS:
            raise OversizeContent(f"context content exceeds {MAX_CONTEXT_CHARS} chars")
        event = self.context.add(principal, modality, content, format_timestamp(self._clock.now()))
        self._recorder.append(
            actor=principal,
            kind="request_received",
            payload={"type": "context_event", "event_id": event.event_id,
                     "principal": principal, "modality": modality},
        )
        return event

    # -- pipeline ------------------------------------------------------------------

    def handle_request(self, request: PromptRequest, policy: Policy | None = None) -> GatewayResponse:
        policy = policy or self._policy
        try:
            return self._run_pipeline(request, policy)
        except StorageError:
            # No unrecorded actions: if the recorder is down the request fails.
            return GatewayResponse(request_id=request.request_id, status=STATUS_REJECTED,
                                   reason_code="recording_unavailable")

    def _run_pipeline(self, request: PromptRequest, policy: Policy) -> GatewayResponse:
        rid = request.request_id
        with self._lock:
            duplicate = rid in self._seen_ids
            self._seen_ids.add(rid)
        self._recorder.append(
            actor=request.principal,
            kind="request_received",
            payload={"type": "prompt", "request_id": rid, "principal": request.principal,
                     "mode": request.mode, "template_id": request.template_id,
                     "context_window": request.context_window},
        )
        if duplicate:
            return self._finalize(rid, policy, STATUS_REJECTED, reason="duplicate_request_id")
        if request.mode not in MODES:
            return self._finalize(rid, policy, STATUS_REJECTED, reason="invalid_mode")

        template = policy.template(request.template_id)
        if template is None:
            return self._finalize(rid, policy, STATUS_REJECTED, reason="unknown_template")
        try:
            prompt = render_prompt(template, request.variables)
        except (MissingVariable, ExtraVariable) as exc:
            return self._finalize(rid, policy, STATUS_REJECTED, reason=exc.code)

        context_events = self.context.last(request.principal, request.context_window)
        if context_events:
            prompt = prompt + "\nContext:\n" + "\n".join(e.content for e in context_events)

        verdict = guardrails.evaluate(guardrails.STAGE_PRE, prompt, policy)
        self._recorder.append(
            actor="guardrail-engine",
            kind="guardrail_verdict",
            payload={"request_id": rid, "stage": guardrails.STAGE_PRE, **verdict.to_payload()},
        )
        if verdict.decision == guardrails.DECISION_REJECT:
            return self._finalize(rid, policy, STATUS_REJECTED, reason=verdict.reason_code)
        prompt = verdict.output_text

        assessment = risk.assess(prompt, policy)
        self._recorder.append(
            actor="risk-assessor",
            kind="risk_assessment",
            payload={"request_id": rid, **assessment.to_payload()},
        )
        if assessment.decision == risk.RISK_REJECT:
            return self._finalize(rid, policy, STATUS_REJECTED, reason="risk_reject")
        effective_mode = risk.escalated_verifier_mode(policy.verifier_mode, assessment.decision)

        if policy.rag_enabled and self._rag_stores:
            prompt = self._augment_with_references(rid, prompt, policy)

        try:
            if request.mode == "simple":
                candidate = self._run_route(rid, prompt, policy)
            else:
                candidate = self._run_goal(rid, prompt, policy)
        except GuardrailAbort as exc:
            return self._finalize(rid, policy, STATUS_REJECTED, reason=exc.reason)
        except (PlanParseError, CyclicPlanError, UnroutableCapability,
                Timeout, BackendError, UnknownFm) as exc:
            return self._finalize(rid, policy, STATUS_REJECTED, reason=exc.code)

        verdict = guardrails.evaluate(guardrails.STAGE_POST, candidate, policy)
        self._recorder.append(
            actor="guardrail-engine",
            kind="guardrail_verdict",
            payload={"request_id": rid, "stage": guardrails.STAGE_POST, **verdict.to_payload()},
        )
        if verdict.decision == guardrails.DECISION_REJECT:
            return self._finalize(rid, policy, STATUS_REJECTED, reason=verdict.reason_code)
        candidate = verdict.output_text

        outcome = self._queue.gate(candidate, policy, rid, self._max_output_chars, mode=effective_mode)
        if outcome.kind == GATE_DELIVER:
            return self._finalize(rid, policy, STATUS_OK, text=outcome.text)
        if outcome.kind == GATE_HOLD:
            with self._lock:
                self._held[rid] = outcome.task_id
                self._task_request[outcome.task_id] = rid
            return GatewayResponse(
                request_id=rid, status=STATUS_HELD, task_id=outcome.task_id,
                trace=self._build_trace(rid) if policy.disclose_trace else None,
            )
        return self._finalize(rid, policy, STATUS_REJECTED, reason=outcome.reason)

    def _augment_with_references(self, rid: str, prompt: str, policy: Policy) -> str:
        if len(self._rag_stores) == 1:
            chunks = self._rag_stores[0].retrieve(prompt, policy.rag_top_k)
        else:
            chunks = federated_retrieve(self._rag_stores, prompt, policy.rag_top_k)
        self._recorder.append(
            actor="rag-store",
            kind="rag_retrieval",
            payload={"request_id": rid, "chunks": [c.to_payload() for c in chunks]},
        )
        if not chunks:
            return prompt
        by_store = {store.store_id: store for store in self._rag_stores}
        texts = []
        for chunk in chunks:
            doc = by_store[chunk.store_id].get_document(chunk.doc_id)
            if doc is not None:
                texts.append(doc.text)
        return "Reference:\n" + "\n".join(texts) + "\n\n" + prompt

    def _run_route(self, rid: str, prompt: str, policy: Policy) -> str:
        fm_request = FmRequest(prompt=prompt, max_output_chars=self._max_output_chars, request_id=rid)
        if len(policy.fm_route) == 1:
            response = self._adapters.invoke(policy.fm_route[0], fm_request,
                                             pii_patterns=policy.pii_patterns)
            return response.text
        final, _ = self._adapters.chain_invoke(policy.fm_route, fm_request, policy)
        return final.text

    def _run_goal(self, rid: str, goal_prompt: str, policy: Policy) -> str:
        coordinator = policy.fm_route[0]
        plan = self.plan(goal_prompt, coordinator, request_id=rid, policy=policy)
        results = self.execute_plan(plan, policy, request_id=rid)
        return "\n".join(results[tid] for tid in plan.sink_ids())

    # -- agents -------------------------------------------------------------------

    def plan(self, goal_text: str, coordinator_fm_id: str, request_id: str = "plan",
             policy: Policy | None = None) -> TaskPlan:
        """Ask the coordinator FM for a task decomposition and validate it."""
        policy = policy or self._policy
        response = self._adapters.invoke(
            coordinator_fm_id,
            FmRequest(prompt=build_planning_prompt(goal_text),
                      max_output_chars=self._max_output_chars, request_id=request_id),
            pii_patterns=policy.pii_patterns,
        )
        try:
            raw = json.loads(response.text)
        except ValueError as exc:
            raise PlanParseError(f"coordinator output is not JSON: {exc}") from exc
        if not isinstance(raw, list):
            raise PlanParseError("coordinator output must be a JSON array")
        tasks = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict) or set(item) != {"task_id", "description", "depends_on", "capability"}:
                raise PlanParseError(f"task {i} must have exactly task_id/description/depends_on/capability")
            if not all(isinstance(item[k], str) for k in ("task_id", "description", "capability")):
                raise PlanParseError(f"task {i} fields must be strings")
            deps = item["depends_on"]
            if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
                raise PlanParseError(f"task {i} depends_on must be a list of task ids")
            tasks.append(PlannedTask(task_id=item["task_id"], description=item["description"],
                                     depends_on=tuple(deps), capability=item["capability"]))
        ids = [t.task_id for t in tasks]
        if len(ids) != len(set(ids)):
            raise PlanParseError("task ids must be unique")
        known = set(ids)
        for t in tasks:
            for dep in t.depends_on:
                if dep not in known:
                    raise PlanParseError(f"task {t.task_id} depends on unknown task {dep!r}")
        _check_acyclic(tasks)
        return TaskPlan(tasks=tuple(tasks))

    def execute_plan(self, plan: TaskPlan, policy: Policy | None = None,
                     request_id: str = "plan") -> dict[str, str]:
        """Run tasks in deterministic topological order (ready tasks by
        lexicographic task_id); each worker is AIBOM-enforced at the point
        of use and each result passes mid-stage guardrails."""
        policy = policy or self._policy
        self._recorder.append(
            actor="orchestrator",
            kind="plan_created",
            payload={"request_id": request_id, "tasks": [t.to_dict() for t in plan.tasks]},
        )
        remaining = {t.task_id: t for t in plan.tasks}
        results: dict[str, str] = {}
        while remaining:
            ready = sorted(tid for tid, t in remaining.items()
                           if all(dep in results for dep in t.depends_on))
            task = remaining.pop(ready[0])
            descriptor = self._adapters.catalog_resolve(task.capability)
            if descriptor is None:
                raise UnroutableCapability(task.task_id)
            if not self._aibom.enforce(descriptor.id, descriptor.model_version, request_id=request_id):
                raise UnroutableCapability(
                    task.task_id,
                    f"worker {descriptor.id!r} for task {task.task_id} refused: no AIBOM record",
                )
            if not self._adapters.is_registered(descriptor.id):
                raise UnroutableCapability(
                    task.task_id, f"worker {descriptor.id!r} is declared but not registered"
                )
            prompt = task.description + "".join("\n" + results[dep] for dep in sorted(task.depends_on))
            response = self._adapters.invoke(
                descriptor.id,
                FmRequest(prompt=prompt, max_output_chars=self._max_output_chars, request_id=request_id),
                pii_patterns=policy.pii_patterns,
            )
            verdict = guardrails.evaluate(guardrails.STAGE_MID, response.text, policy)
            self._recorder.append(
                actor="guardrail-engine",
                kind="guardrail_verdict",
                payload={"request_id": request_id, "stage": guardrails.STAGE_MID,
                         "task_id": task.task_id, **verdict.to_payload()},
            )
            if verdict.decision == guardrails.DECISION_REJECT:
                raise GuardrailAbort(task.task_id, verdict.reason_code)
            text = verdict.output_text
            self._recorder.append(
                actor="orchestrator",
                kind="task_result",
                payload={"request_id": request_id, "task_id": task.task_id, "text": text},
            )
            results[task.task_id] = text
        return results

    # -- verdict handling -------------------------------------------------------------

    def apply_verdict(self, task_id: str, verdict: str, principal: str,
                      new_text: str | None = None, reason: str | None = None) -> VerificationTask:
        """Apply a human verdict to a held request and finalize it."""
        try:
            task = self._queue.human_verdict(task_id, verdict, principal,
                                             new_text=new_text, reason=reason)
        except Expired:
            expired_task = self._queue.get_task(task_id)
            if expired_task is not None:
                self._resolve_expired(expired_task)
            raise
        rid = task.request_id
        policy = self._policy
        self._recorder.append(
            actor="verifier",
            kind="verifier_verdict",
            payload={"request_id": rid, "task_id": task_id, "status": task.status,
                     "principal": principal, "reason": reason},
        )
        if task.status == STATUS_APPROVED:
            self._finalize(rid, policy, STATUS_OK, text=task.final_text)
        elif task.status == STATUS_EDITED:
            check = guardrails.evaluate(guardrails.STAGE_POST, task.final_text, policy)
            self._recorder.append(
                actor="guardrail-engine",
                kind="guardrail_verdict",
                payload={"request_id": rid, "stage": guardrails.STAGE_POST,
                         "task_id": task_id, **check.to_payload()},
            )
            if check.decision == guardrails.DECISION_REJECT:
                self._finalize(rid, policy, STATUS_REJECTED, reason=check.reason_code)
            else:
                self._finalize(rid, policy, STATUS_OK, text=check.output_text)
        else:
            self._finalize(rid, policy, STATUS_REJECTED, reason=reason or REASON_HUMAN_REJECT)
        with self._lock:
            self._held.pop(rid, None)
        return task

    def expire_overdue(self) -> list[VerificationTask]:
        """Resolve every overdue pending task as a fail-safe timeout."""
        expired = self._queue.expire_due()
        for task in expired:
            self._resolve_expired(task)
        return expired

    def _resolve_expired(self, task: VerificationTask) -> None:
        rid = task.request_id
        with self._lock:
            still_held = self._held.pop(rid, None) is not None
        if not still_held:
            return
        self._recorder.append(
            actor="verifier",
            kind="verifier_verdict",
            payload={"request_id": rid, "task_id": task.task_id, "status": STATUS_EXPIRED,
                     "principal": "system", "reason": REASON_TIMEOUT},
        )
        self._finalize(rid, self._policy, STATUS_REJECTED, reason=REASON_TIMEOUT)

    # -- results ---------------------------------------------------------------------

    def get_result(self, request_id: str) -> GatewayResponse | None:
        self.expire_overdue()
        with self._lock:
            if request_id in self._results:
                return self._results[request_id]
            task_id = self._held.get(request_id)
        if task_id is not None:
            return GatewayResponse(
                request_id=request_id, status=STATUS_HELD, task_id=task_id,
                trace=self._build_trace(request_id) if self._policy.disclose_trace else None,
            )
        return None

    def request_task_id(self, request_id: str) -> str | None:
        return self._held.get(request_id)

    def _finalize(self, rid: str, policy: Policy, status: str,
                  text: str | None = None, reason: str | None = None) -> GatewayResponse:
        payload = {"type": "response", "request_id": rid, "status": status}
        if text is not None:
            payload["text"] = text
        if reason is not None:
            payload["reason_code"] = reason
        self._recorder.append(actor="gateway-api", kind="response_delivered", payload=payload)
        response = GatewayResponse(
            request_id=rid, status=status, text=text, reason_code=reason,
            trace=self._build_trace(rid) if policy.disclose_trace else None,
        )
        with self._lock:
            self._results[rid] = response
        return response

    def _build_trace(self, request_id: str) -> tuple[TraceStep, ...]:
        events = self._recorder.query(request_id=request_id)
        return tuple(
            TraceStep(
                step_no=i + 1,
                component=_COMPONENT_BY_KIND.get(ev.kind, ev.kind),
                summary=_step_summary(ev.kind, ev.payload),
                audit_seq=ev.seq,
            )
            for i, ev in enumerate(events)
        )


def _check_acyclic(tasks: list[PlannedTask]) -> None:
    indegree = {t.task_id: 0 for t in tasks}
    dependents: dict[str, list[str]] = {t.task_id: [] for t in tasks}
    for t in tasks:
        for dep in t.depends_on:
            indegree[t.task_id] += 1
            dependents[dep].append(t.task_id)
    queue = [tid for tid, deg in indegree.items() if deg == 0]
    visited = 0
    while queue:
        tid = queue.pop()
        visited += 1
        for nxt in dependents[tid]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    if visited != len(tasks):
        raise CyclicPlanError("task dependency graph contains a cycle")
