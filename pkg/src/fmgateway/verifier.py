"""Verification gate between FM output and delivery.

Three modes: automatic passes candidates straight through, rule mode runs a
fixed check set, human mode parks the candidate in a review queue and the
client polls. Unreviewed tasks fail safe: past the deadline they resolve to
a rejection rather than silently auto-approving.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta

from . import guardrails
from .clock import format_timestamp
from .errors import AlreadyDecided, Expired, UnknownTask
from .policy import Policy

STATUS_PENDING = "pending"
STATUS_APPROVED = "approved"
STATUS_EDITED = "edited"
STATUS_REJECTED = "rejected"
STATUS_EXPIRED = "expired"
TERMINAL_STATUSES = {STATUS_APPROVED, STATUS_EDITED, STATUS_REJECTED, STATUS_EXPIRED}

GATE_DELIVER = "deliver"
GATE_HOLD = "hold"
GATE_REJECT = "reject"

VERDICT_APPROVE = "approve"
VERDICT_EDIT = "edit"
VERDICT_REJECT = "reject"

REASON_TIMEOUT = "verifier_timeout"
REASON_HUMAN_REJECT = "verifier_rejected"


@dataclass(frozen=True)
class VerificationTask:
    task_id: str
    request_id: str
    candidate_text: str
    created_at: datetime
    deadline: datetime
    status: str = STATUS_PENDING
    verdict_by: str | None = None
    final_text: str | None = None

    def to_payload(self) -> dict:
        return {
            "task_id": self.task_id,
            "request_id": self.request_id,
            "candidate_text": self.candidate_text,
            "created_at": format_timestamp(self.created_at),
            "deadline": format_timestamp(self.deadline),
            "status": self.status,
            "verdict_by": self.verdict_by,
            "final_text": self.final_text,
        }


@dataclass(frozen=True)
class GateOutcome:
    kind: str
    text: str | None = None
    task_id: str | None = None
    reason: str | None = None


class VerifierQueue:
    """Task store with first-verdict-wins semantics."""

    def __init__(self, recorder, clock):
        self._recorder = recorder
        self._clock = clock
        self._tasks: dict[str, VerificationTask] = {}
        self._order: list[str] = []
        self._counter = 0
        self._lock = threading.Lock()

    def gate(self, candidate_text: str, policy: Policy, request_id: str,
             max_output_chars: int, mode: str | None = None) -> GateOutcome:
        """Decide delivery for a post-guardrail candidate.

        ``mode`` overrides the policy's verifier_mode (risk escalation
        upgrades automatic to rule for a single request).
        """
        mode = mode or policy.verifier_mode
        if mode == "automatic":
            return GateOutcome(GATE_DELIVER, text=candidate_text)
        if mode == "rule":
            lowered = candidate_text.lower()
            for kw in policy.topic_blacklist:
                if guardrails.contains_word(lowered, kw):
                    return GateOutcome(GATE_REJECT, reason=guardrails.REASON_BLACKLISTED)
            if policy.topic_whitelist and not any(
                guardrails.contains_word(lowered, kw) for kw in policy.topic_whitelist
            ):
                return GateOutcome(GATE_REJECT, reason=guardrails.REASON_OFF_TOPIC)
            if len(candidate_text) > max_output_chars:
                return GateOutcome(GATE_REJECT, reason=guardrails.REASON_FORMAT_VIOLATION)
            return GateOutcome(GATE_DELIVER, text=candidate_text)
        if mode == "human":
            task = self._create_task(candidate_text, policy, request_id)
            self._recorder.append(
                actor="verifier",
                kind="verifier_submitted",
                payload={"request_id": request_id, "task_id": task.task_id,
                         "candidate_text": candidate_text,
                         "deadline": format_timestamp(task.deadline)},
            )
            return GateOutcome(GATE_HOLD, task_id=task.task_id)
        raise ValueError(f"unknown verifier mode: {mode!r}")

    def _create_task(self, candidate_text: str, policy: Policy, request_id: str) -> VerificationTask:
        with self._lock:
            self._counter += 1
            now = self._clock.now()
            task = VerificationTask(
                task_id=f"vt-{self._counter:06d}",
                request_id=request_id,
                candidate_text=candidate_text,
                created_at=now,
                deadline=now + timedelta(seconds=policy.human_verdict_timeout_s),
            )
            self._tasks[task.task_id] = task
            self._order.append(task.task_id)
            return task

    def get_task(self, task_id: str) -> VerificationTask | None:
        return self._tasks.get(task_id)

    def human_verdict(self, task_id: str, verdict: str, principal: str,
                      new_text: str | None = None, reason: str | None = None) -> VerificationTask:
        """Apply one verdict; terminal tasks are immutable.

        A verdict arriving past the deadline marks the task expired and
        raises Expired -- the caller resolves the held request as a timeout.
        """
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise UnknownTask(f"no such verification task: {task_id!r}")
            if task.status in TERMINAL_STATUSES:
                raise AlreadyDecided(f"task {task_id} already {task.status}")
            if self._clock.now() >= task.deadline:
                self._tasks[task_id] = replace(task, status=STATUS_EXPIRED, verdict_by=None)
                raise Expired(f"task {task_id} deadline passed")
            if verdict == VERDICT_APPROVE:
                updated = replace(task, status=STATUS_APPROVED, verdict_by=principal,
                                  final_text=task.candidate_text)
            elif verdict == VERDICT_EDIT:
                if not isinstance(new_text, str):
                    raise ValueError("edit verdict requires new_text")
                if new_text == task.candidate_text:
                    raise ValueError("edited text must differ from the candidate")
                updated = replace(task, status=STATUS_EDITED, verdict_by=principal, final_text=new_text)
            elif verdict == VERDICT_REJECT:
                updated = replace(task, status=STATUS_REJECTED, verdict_by=principal)
            else:
                raise ValueError(f"unknown verdict: {verdict!r}")
            self._tasks[task_id] = updated
            return updated

    def poll_pending(self, limit: int = 50) -> list[VerificationTask]:
        """Pending, non-expired tasks, oldest first."""
        now = self._clock.now()
        with self._lock:
            out = []
            for task_id in self._order:
                task = self._tasks[task_id]
                if task.status == STATUS_PENDING and now < task.deadline:
                    out.append(task)
                if len(out) >= limit:
                    break
            return out

    def expire_due(self) -> list[VerificationTask]:
        """Transition overdue pending tasks to expired; returns them."""
        now = self._clock.now()
        expired = []
        with self._lock:
            for task_id in self._order:
                task = self._tasks[task_id]
                if task.status == STATUS_PENDING and now >= task.deadline:
                    task = replace(task, status=STATUS_EXPIRED)
                    self._tasks[task_id] = task
                    expired.append(task)
        return expired

    def tasks(self) -> list[VerificationTask]:
        with self._lock:
            return [self._tasks[tid] for tid in self._order]
