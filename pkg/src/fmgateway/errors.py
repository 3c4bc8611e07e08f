"""Exception types shared across the gateway.

Every error carries a stable ``code`` string; the HTTP layer and audit
payloads surface these codes verbatim, so they are part of the wire
contract and must not be renamed casually.
"""

from __future__ import annotations


class GatewayError(Exception):
    """Base class; ``code`` is the stable machine-readable identifier."""

    code = "gateway_error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- policy / template loading ---------------------------------------------

class ParseError(GatewayError):
    code = "parse_error"


class ValidationError(GatewayError):
    code = "validation_error"


class UnknownFieldError(GatewayError):
    code = "unknown_field"


class MissingVariable(GatewayError):
    code = "missing_variable"

    def __init__(self, name: str):
        super().__init__(f"missing template variable: {name}")
        self.name = name


class ExtraVariable(GatewayError):
    code = "extra_variable"

    def __init__(self, name: str):
        super().__init__(f"unexpected template variable: {name}")
        self.name = name


# --- recorder ----------------------------------------------------------------

class StorageError(GatewayError):
    code = "recording_unavailable"


class RangeError(GatewayError):
    code = "range_error"


# --- registry ----------------------------------------------------------------

class DuplicateError(GatewayError):
    code = "duplicate"


class UnregisteredArtifact(GatewayError):
    code = "unregistered_artifact"


# --- rag ----------------------------------------------------------------------

class DuplicateDocId(GatewayError):
    code = "duplicate_doc_id"


# --- adapters ------------------------------------------------------------------

class UnknownFm(GatewayError):
    code = "unknown_fm"


class DuplicateAdapter(GatewayError):
    code = "duplicate_adapter"


class AibomRefused(GatewayError):
    code = "aibom_refused"


class BackendError(GatewayError):
    code = "backend_error"


class Timeout(GatewayError):
    code = "timeout"


class GuardrailAbort(GatewayError):
    """A mid-stage guardrail rejected an intermediate text.

    ``step`` is the chain step index or the task id, depending on caller.
    """

    code = "guardrail_abort"

    def __init__(self, step, reason: str):
        super().__init__(f"guardrail abort at {step}: {reason}")
        self.step = step
        self.reason = reason


# --- verifier ------------------------------------------------------------------

class UnknownTask(GatewayError):
    code = "unknown_task"


class AlreadyDecided(GatewayError):
    code = "already_decided"


class Expired(GatewayError):
    code = "expired"


# --- orchestrator ----------------------------------------------------------------

class PlanParseError(GatewayError):
    code = "plan_parse_error"


class CyclicPlanError(GatewayError):
    code = "cyclic_plan"


class UnroutableCapability(GatewayError):
    code = "unroutable_capability"

    def __init__(self, task_id: str, message: str = ""):
        super().__init__(message or f"no routable worker for task {task_id}")
        self.task_id = task_id


class OversizeContent(GatewayError):
    code = "oversize_content"


# --- api -------------------------------------------------------------------------

class Unauthorized(GatewayError):
    code = "unauthorized"


class Forbidden(GatewayError):
    code = "forbidden"


class QuotaExceeded(GatewayError):
    code = "quota_exceeded"
