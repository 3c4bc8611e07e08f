"""Governed foundation-model gateway.

Library surface: policy loading and prompt templating, staged guardrails,
risk assessment, a hash-chained black-box recorder, AIBOM/co-versioning
registries, a deterministic RAG store with federated merge, the FM adapter
layer, the verifier queue, and the request orchestrator. The HTTP API and
CLI live in :mod:`fmgateway.api` and :mod:`fmgateway.cli`.
"""

from .adapters import AdapterRegistry, FmRequest, FmResponse
from .clock import ManualClock, SystemClock
from .guardrails import GuardrailVerdict, check_topic_scope, evaluate, redact_pii
from .orchestrator import GatewayResponse, Orchestrator, PromptRequest, TaskPlan
from .policy import FmDescriptor, Policy, PromptTemplate, load_policy, render_prompt, serialize_policy
from .rag import VectorStore, embed, federated_retrieve
from .recorder import AuditEvent, BlackBoxRecorder, FileAuditStore, MemoryAuditStore
from .registry import AibomRecord, AibomRegistry
from .reporting import Report, generate_report
from .risk import RiskAssessment, assess
from .verifier import VerificationTask, VerifierQueue

__all__ = [
    "AdapterRegistry",
    "AibomRecord",
    "AibomRegistry",
    "AuditEvent",
    "BlackBoxRecorder",
    "FileAuditStore",
    "FmDescriptor",
    "FmRequest",
    "FmResponse",
    "GatewayResponse",
    "GuardrailVerdict",
    "ManualClock",
    "MemoryAuditStore",
    "Orchestrator",
    "Policy",
    "PromptRequest",
    "PromptTemplate",
    "Report",
    "RiskAssessment",
    "SystemClock",
    "TaskPlan",
    "VectorStore",
    "VerificationTask",
    "VerifierQueue",
    "assess",
    "check_topic_scope",
    "embed",
    "evaluate",
    "federated_retrieve",
    "generate_report",
    "load_policy",
    "redact_pii",
    "render_prompt",
    "serialize_policy",
]

__version__ = "0.1.0"
