"""Continuous risk assessment over prompts and intermediate outputs.

The score is a saturating weighted sum over triggered indicators: monotone,
bounded to [0,1], and fully explainable from the policy. Thresholds split
the score into allow / escalate / reject; an escalation upgrades the
request's verifier mode to at least rule-based review.
"""

from __future__ import annotations

from dataclasses import dataclass

from .guardrails import contains_word
from .policy import Policy

RISK_ALLOW = "allow"
RISK_ESCALATE = "escalate"
RISK_REJECT = "reject"


@dataclass(frozen=True)
class RiskAssessment:
    score: float
    triggered: tuple[str, ...]
    decision: str

    def to_payload(self) -> dict:
        return {"score": self.score, "triggered": list(self.triggered), "decision": self.decision}


def assess(text: str, policy: Policy) -> RiskAssessment:
    """Pure function of (text, policy).

    An indicator triggers when any of its matcher keywords occurs as a
    whole word (case-insensitive). score = min(1, sum of triggered weights);
    allow below the modify threshold, reject at or above the reject
    threshold, escalate in between.
    """
    lowered = text.lower()
    triggered = tuple(
        ind.id
        for ind in policy.risk_indicators
        if any(contains_word(lowered, kw) for kw in ind.matcher)
    )
    weights = {ind.id: ind.weight for ind in policy.risk_indicators}
    score = min(1.0, sum(weights[t] for t in triggered))
    if score >= policy.risk_threshold_reject:
        decision = RISK_REJECT
    elif score >= policy.risk_threshold_modify:
        decision = RISK_ESCALATE
    else:
        decision = RISK_ALLOW
    return RiskAssessment(score=score, triggered=triggered, decision=decision)


def escalated_verifier_mode(base_mode: str, decision: str) -> str:
    """Escalation forces at least rule-based verification for the request."""
    if decision == RISK_ESCALATE and base_mode == "automatic":
        return "rule"
    return base_mode
