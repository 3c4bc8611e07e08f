"""Rule-based guardrails applied at the three pipeline stages.

Evaluation order is fixed: blacklist, then topic scope (pre stage only,
skipped when the whitelist is empty), then PII redaction. The first reject
short-circuits. Rejections are verdicts, not exceptions: a refusal is a
normal, recordable outcome.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

from .policy import PiiPattern, Policy

STAGE_PRE = "pre"
STAGE_MID = "mid"
STAGE_POST = "post"
STAGES = (STAGE_PRE, STAGE_MID, STAGE_POST)

DECISION_ALLOW = "allow"
DECISION_ALLOW_REDACTED = "allow_redacted"
DECISION_REJECT = "reject"

REASON_OFF_TOPIC = "off_topic"
REASON_BLACKLISTED = "blacklisted_term"
REASON_PII_UNREDACTABLE = "pii_unredactable"
REASON_FORMAT_VIOLATION = "format_violation"

SCOPE_IN = "in_scope"
SCOPE_OFF_TOPIC = "off_topic"
SCOPE_BLACKLISTED = "blacklisted"


@dataclass(frozen=True)
class Redaction:
    pattern_name: str
    ordinal: int
    start: int
    end: int


@dataclass(frozen=True)
class GuardrailVerdict:
    decision: str
    output_text: str
    reason_code: str | None = None
    redactions: tuple[Redaction, ...] = field(default=())

    def to_payload(self) -> dict:
        return {
            "decision": self.decision,
            "reason_code": self.reason_code,
            "redactions": [[r.pattern_name, r.ordinal, [r.start, r.end]] for r in self.redactions],
            "output_text": self.output_text,
        }


@lru_cache(maxsize=4096)
def _word_re(keyword: str) -> re.Pattern:
    # Lookarounds instead of \b so keywords ending in non-word chars still
    # get whole-word semantics.
    return re.compile(rf"(?<!\w){re.escape(keyword)}(?!\w)")


def contains_word(text_lower: str, keyword: str) -> bool:
    return _word_re(keyword).search(text_lower) is not None


def check_topic_scope(text: str, whitelist, blacklist) -> str:
    """Whole-word, case-insensitive scope check.

    Blacklist dominates; an empty whitelist means every topic is in scope.
    """
    lowered = text.lower()
    for kw in blacklist:
        if contains_word(lowered, kw):
            return SCOPE_BLACKLISTED
    if not whitelist:
        return SCOPE_IN
    for kw in whitelist:
        if contains_word(lowered, kw):
            return SCOPE_IN
    return SCOPE_OFF_TOPIC


def _next_match(text: str, pos: int, compiled: list[re.Pattern]):
    """Earliest-start match across patterns; at equal start the longest wins,
    then the pattern listed first. Zero-length matches are ignored."""
    best_key = None
    best = None
    for idx, rx in enumerate(compiled):
        m = rx.search(text, pos)
        while m is not None and m.end() == m.start():
            if m.start() + 1 > len(text):
                m = None
                break
            m = rx.search(text, m.start() + 1)
        if m is None:
            continue
        key = (m.start(), -(m.end() - m.start()), idx)
        if best_key is None or key < best_key:
            best_key = key
            best = (idx, m)
    return best


def redact_pii(text: str, patterns) -> tuple[str, list[Redaction]]:
    """Replace PII matches left to right, non-overlapping, leftmost-longest.

    Ordinals count per pattern name starting at 1; the replacement tag's
    ``{n}`` slot receives the ordinal. Spans index into the input text.
    """
    patterns = list(patterns)
    if not patterns:
        return text, []
    compiled = [p.compiled() for p in patterns]
    counters: dict[str, int] = {}
    parts: list[str] = []
    redactions: list[Redaction] = []
    pos = 0
    while pos <= len(text):
        found = _next_match(text, pos, compiled)
        if found is None:
            break
        idx, m = found
        spec = patterns[idx]
        ordinal = counters.get(spec.name, 0) + 1
        counters[spec.name] = ordinal
        parts.append(text[pos:m.start()])
        parts.append(spec.replacement_tag.replace("{n}", str(ordinal)))
        redactions.append(Redaction(spec.name, ordinal, m.start(), m.end()))
        pos = m.end()
    parts.append(text[pos:])
    return "".join(parts), redactions


def evaluate(stage: str, text: str, policy: Policy) -> GuardrailVerdict:
    """Evaluate ``text`` at a pipeline stage against the policy.

    Mid and post stages apply blacklist + PII only: intermediate agent
    output legitimately wanders across topics, and scope was settled at the
    pre stage. A redaction pass whose output still matches a PII pattern
    (a replacement tag re-triggering a rule) rejects as unredactable rather
    than looping.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown guardrail stage: {stage!r}")
    lowered = text.lower()
    for kw in policy.topic_blacklist:
        if contains_word(lowered, kw):
            return GuardrailVerdict(DECISION_REJECT, "", reason_code=REASON_BLACKLISTED)
    if stage == STAGE_PRE and policy.topic_whitelist:
        if not any(contains_word(lowered, kw) for kw in policy.topic_whitelist):
            return GuardrailVerdict(DECISION_REJECT, "", reason_code=REASON_OFF_TOPIC)
    if policy.pii_patterns:
        redacted, redactions = redact_pii(text, policy.pii_patterns)
        if redactions:
            _, residue = redact_pii(redacted, policy.pii_patterns)
            if residue:
                return GuardrailVerdict(DECISION_REJECT, "", reason_code=REASON_PII_UNREDACTABLE)
            return GuardrailVerdict(DECISION_ALLOW_REDACTED, redacted, redactions=tuple(redactions))
    return GuardrailVerdict(DECISION_ALLOW, text)
