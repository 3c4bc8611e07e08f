import json

import pytest

from fmgateway.adapters import AdapterRegistry
from fmgateway.clock import ManualClock
from fmgateway.orchestrator import Orchestrator
from fmgateway.policy import FmDescriptor, load_policy
from fmgateway.recorder import BlackBoxRecorder, MemoryAuditStore
from fmgateway.registry import AibomRecord, AibomRegistry
from fmgateway.verifier import VerifierQueue

DEFAULT_POLICY = {
    "id": "policy-test",
    "version": "1",
    "topic_whitelist": [],
    "topic_blacklist": [],
    "pii_patterns": [],
    "risk_indicators": [],
    "risk_threshold_modify": 0.5,
    "risk_threshold_reject": 0.8,
    "verifier_mode": "automatic",
    "disclose_trace": False,
    "fm_route": ["echo-1"],
    "rag_enabled": False,
    "rag_top_k": 3,
    "human_verdict_timeout_s": 3600,
    "templates": [
        {"id": "qa", "body": "Q: {{q}}", "required_vars": ["q"], "output_format_note": ""},
    ],
}

EMAIL_PATTERN = {
    "name": "EMAIL",
    "pattern": r"[a-z0-9._]+@[a-z0-9-]+\.[a-z]{2,}",
    "replacement_tag": "[EMAIL_{n}]",
}
PHONE_PATTERN = {
    "name": "PHONE",
    "pattern": r"\d{3}-\d{3}-\d{4}",
    "replacement_tag": "[PHONE_{n}]",
}


def make_policy(**overrides):
    doc = dict(DEFAULT_POLICY)
    doc.update(overrides)
    return load_policy(json.dumps(doc).encode("utf-8"))


def make_descriptor(fm_id, adapter_kind="echo", capabilities=("chat",), version="1",
                    endpoint=None):
    return FmDescriptor(
        id=fm_id, fm_type=1, capabilities=frozenset(capabilities),
        adapter_kind=adapter_kind, model_version=version, endpoint=endpoint,
    )


def aibom_for(fm_id, version="1", component_type="fm"):
    return AibomRecord(component_id=fm_id, version=version, supplier="acme",
                       component_type=component_type)


class Stack:
    """One fully wired in-memory gateway core for tests."""

    def __init__(self, policy=None, clock=None, store=None):
        self.clock = clock or ManualClock()
        self.store = store if store is not None else MemoryAuditStore()
        self.recorder = BlackBoxRecorder(self.store, self.clock, location="test-node")
        self.aibom = AibomRegistry(self.recorder, self.clock)
        self.adapters = AdapterRegistry(self.recorder, self.aibom, self.clock)
        self.queue = VerifierQueue(self.recorder, self.clock)
        self.policy = policy or make_policy()
        self.orchestrator = Orchestrator(
            policy=self.policy, recorder=self.recorder, adapters=self.adapters,
            aibom=self.aibom, verifier_queue=self.queue, clock=self.clock,
        )

    def add_backend(self, fm_id, adapter_kind="echo", capabilities=("chat",),
                    script=None, version="1", register=True, with_aibom=True):
        descriptor = make_descriptor(fm_id, adapter_kind, capabilities, version)
        if with_aibom:
            self.aibom.register_aibom(aibom_for(fm_id, version))
        self.adapters.declare_backend(descriptor, script)
        if register:
            self.adapters.register_adapter(descriptor, script)
        return descriptor

    def events(self, **filters):
        return self.recorder.query(**filters)


def make_tie_free_corpus(rng, n, query, vocab):
    """doc_id -> text such that every doc shares a token with the query and
    all cosine scores against the query are pairwise distinct (so the top-k
    set is unique and partition merges must reproduce it exactly).

    Each doc carries its own filler token; repeating that token grows the
    doc's norm along a fine-grained continuum, so colliding scores can
    always be separated by appending one more copy.
    """
    import numpy as np

    from fmgateway.rag import embed

    query_words = query.split()
    texts = {}
    filler = {}
    for i in range(n):
        doc_id = f"d{i:04d}"
        filler[doc_id] = f"uniq{i}"
        words = [rng.choice(vocab) for _ in range(rng.randint(0, 5))]
        words.append(rng.choice(query_words))
        words.extend([filler[doc_id]] * rng.randint(1, 40))
        texts[doc_id] = " ".join(words)
    q = embed(query)
    scores = {doc_id: float(np.dot(q, embed(text))) for doc_id, text in texts.items()}
    for _ in range(200):
        seen = {}
        collided = []
        for doc_id in texts:
            s = scores[doc_id]
            if s in seen:
                collided.append(doc_id)
            else:
                seen[s] = doc_id
        if not collided:
            return texts
        for doc_id in collided:
            texts[doc_id] += (" " + filler[doc_id]) * rng.randint(1, 50)
            scores[doc_id] = float(np.dot(q, embed(texts[doc_id])))
    raise RuntimeError("could not build a tie-free corpus")


def aggregate_export_oracle(jsonl: bytes, start: str, end: str) -> dict:
    """Independent full-scan aggregation over a JSON Lines audit export,
    shaped like Report.to_dict()['totals']."""
    from collections import Counter

    from fmgateway.clock import parse_timestamp

    s, e = parse_timestamp(start), parse_timestamp(end)
    requests = delivered = overrides = 0
    rejected = Counter()
    histogram = [0] * 10
    fm_calls = Counter()
    responded, submitted = set(), set()
    for line in jsonl.splitlines():
        if not line:
            continue
        ev = json.loads(line)
        ts = parse_timestamp(ev["timestamp_utc"])
        if not (s <= ts < e):
            continue
        kind, payload = ev["kind"], ev["payload"]
        if kind == "request_received" and payload.get("type") == "prompt":
            requests += 1
        elif kind == "response_delivered" and payload.get("type") == "response":
            responded.add(payload.get("request_id"))
            if payload.get("status") == "ok":
                delivered += 1
            elif payload.get("status") == "rejected":
                rejected[payload.get("reason_code") or "unspecified"] += 1
        elif kind == "verifier_submitted":
            submitted.add(payload.get("request_id"))
        elif kind == "verifier_verdict" and payload.get("status") in ("edited", "rejected"):
            overrides += 1
        elif kind == "risk_assessment":
            histogram[min(9, int(payload.get("score", 0.0) * 10))] += 1
        elif kind == "fm_call":
            fm_calls[payload.get("fm_id", "unknown")] += 1
    return {
        "requests": requests,
        "delivered": delivered,
        "rejected_total": sum(rejected.values()),
        "rejected_by_reason": dict(sorted(rejected.items())),
        "held": len(submitted - responded),
        "verifier_overrides": overrides,
        "risk_score_histogram": histogram,
        "fm_calls_by_fm_id": dict(sorted(fm_calls.items())),
    }


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def stack():
    s = Stack()
    s.add_backend("echo-1")
    return s
