"""Declarative gateway policy: the single configuration object every other
module reads.

A policy document is strict JSON: unknown top-level keys are rejected so
configuration drift fails loudly. Loaded policies are immutable; a reload
swaps the whole object.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .canonical import canonical_json_bytes
from .errors import (
    ExtraVariable,
    MissingVariable,
    ParseError,
    UnknownFieldError,
    ValidationError,
)

VERIFIER_MODES = ("automatic", "rule", "human")
ADAPTER_KINDS = ("echo", "scripted", "failing", "http")

# Placeholder grammar: exactly {{name}} with a lowercase identifier. A `{{`
# that does not open a valid placeholder is an error (no escaping).
_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_][a-z0-9_]*)\}\}")


@dataclass(frozen=True)
class PiiPattern:
    name: str
    pattern: str
    replacement_tag: str

    def compiled(self) -> re.Pattern:
        return re.compile(self.pattern)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    required_vars: frozenset[str]
    output_format_note: str = ""


@dataclass(frozen=True)
class FmDescriptor:
    id: str
    fm_type: int
    capabilities: frozenset[str]
    adapter_kind: str
    model_version: str
    endpoint: str | None = None


@dataclass(frozen=True)
class RiskIndicator:
    id: str
    weight: float
    matcher: tuple[str, ...]
    description: str = ""


@dataclass(frozen=True)
class Policy:
    id: str
    version: str
    topic_whitelist: tuple[str, ...]
    topic_blacklist: tuple[str, ...]
    pii_patterns: tuple[PiiPattern, ...]
    risk_indicators: tuple[RiskIndicator, ...]
    risk_threshold_modify: float
    risk_threshold_reject: float
    verifier_mode: str
    disclose_trace: bool
    fm_route: tuple[str, ...]
    rag_enabled: bool
    rag_top_k: int
    human_verdict_timeout_s: int
    templates: tuple[PromptTemplate, ...] = field(default=())

    def template(self, template_id: str) -> PromptTemplate | None:
        for t in self.templates:
            if t.id == template_id:
                return t
        return None


_REQUIRED_KEYS = {
    "id",
    "version",
    "risk_threshold_modify",
    "risk_threshold_reject",
    "verifier_mode",
    "fm_route",
}
_OPTIONAL_DEFAULTS = {
    "topic_whitelist": [],
    "topic_blacklist": [],
    "pii_patterns": [],
    "risk_indicators": [],
    "disclose_trace": False,
    "rag_enabled": False,
    "rag_top_k": 3,
    "human_verdict_timeout_s": 3600,
    "templates": [],
}
_ALL_KEYS = _REQUIRED_KEYS | set(_OPTIONAL_DEFAULTS)


def _require(cond: bool, invariant: str) -> None:
    if not cond:
        raise ValidationError(invariant)


def _str_list(value, label: str) -> list[str]:
    _require(isinstance(value, list) and all(isinstance(v, str) for v in value),
             f"{label} must be a list of strings")
    return value


def _keyword_list(value, label: str) -> tuple[str, ...]:
    items = _str_list(value, label)
    for kw in items:
        _require(kw != "" and kw == kw.lower(), f"{label} entries must be lowercase keywords")
    return tuple(items)


def placeholder_names(body: str) -> set[str]:
    """Names of all valid ``{{name}}`` placeholders in ``body``.

    Raises ValidationError for a stray ``{{`` that does not open a valid
    placeholder.
    """
    names = set()
    pos = 0
    while True:
        brace = body.find("{{", pos)
        if brace == -1:
            return names
        m = _PLACEHOLDER_RE.match(body, brace)
        if m is None:
            raise ValidationError(f"stray '{{{{' at offset {brace} is not a valid placeholder")
        names.add(m.group(1))
        pos = m.end()


def _parse_template(raw, index: int) -> PromptTemplate:
    _require(isinstance(raw, dict), f"templates[{index}] must be an object")
    allowed = {"id", "body", "required_vars", "output_format_note"}
    unknown = set(raw) - allowed
    if unknown:
        raise UnknownFieldError(f"templates[{index}]: unknown key {sorted(unknown)[0]!r}")
    _require(isinstance(raw.get("id"), str) and raw["id"] != "", f"templates[{index}].id must be a non-empty string")
    _require(isinstance(raw.get("body"), str), f"templates[{index}].body must be a string")
    declared = frozenset(_str_list(raw.get("required_vars", []), f"templates[{index}].required_vars"))
    found = placeholder_names(raw["body"])
    _require(declared == found,
             f"templates[{index}].required_vars must exactly equal placeholder names in body")
    note = raw.get("output_format_note", "")
    _require(isinstance(note, str), f"templates[{index}].output_format_note must be a string")
    return PromptTemplate(id=raw["id"], body=raw["body"], required_vars=declared, output_format_note=note)


def _parse_pii(raw, index: int) -> PiiPattern:
    _require(isinstance(raw, dict), f"pii_patterns[{index}] must be an object")
    allowed = {"name", "pattern", "replacement_tag"}
    unknown = set(raw) - allowed
    if unknown:
        raise UnknownFieldError(f"pii_patterns[{index}]: unknown key {sorted(unknown)[0]!r}")
    name = raw.get("name")
    pattern = raw.get("pattern")
    tag = raw.get("replacement_tag")
    _require(isinstance(name, str) and name != "", f"pii_patterns[{index}].name must be a non-empty string")
    _require(isinstance(pattern, str), f"pii_patterns[{index}].pattern must be a string")
    try:
        re.compile(pattern)
    except re.error as exc:
        raise ValidationError(f"pii_patterns[{index}].pattern does not compile: {exc}") from exc
    _require(isinstance(tag, str) and tag != "", f"pii_patterns[{index}].replacement_tag must be non-empty")
    return PiiPattern(name=name, pattern=pattern, replacement_tag=tag)


def _parse_indicator(raw, index: int) -> RiskIndicator:
    _require(isinstance(raw, dict), f"risk_indicators[{index}] must be an object")
    allowed = {"id", "weight", "matcher", "description"}
    unknown = set(raw) - allowed
    if unknown:
        raise UnknownFieldError(f"risk_indicators[{index}]: unknown key {sorted(unknown)[0]!r}")
    _require(isinstance(raw.get("id"), str) and raw["id"] != "", f"risk_indicators[{index}].id must be a non-empty string")
    weight = raw.get("weight")
    _require(isinstance(weight, (int, float)) and not isinstance(weight, bool) and 0 < weight <= 1,
             f"risk_indicators[{index}].weight must be in (0,1]")
    matcher = _keyword_list(raw.get("matcher", []), f"risk_indicators[{index}].matcher")
    _require(len(matcher) > 0, f"risk_indicators[{index}].matcher must be non-empty")
    description = raw.get("description", "")
    _require(isinstance(description, str), f"risk_indicators[{index}].description must be a string")
    return RiskIndicator(id=raw["id"], weight=float(weight), matcher=matcher, description=description)


def load_policy(document: bytes | str, adapter_ids: set[str] | None = None) -> Policy:
    """Parse and validate a policy document.

    ``adapter_ids``, when given, is the set of registered adapter ids the
    ``fm_route`` must resolve against (enforced at server load; standalone
    policy checks pass None).

    Raises ParseError, UnknownFieldError, or ValidationError; never returns
    a partially constructed policy.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"policy document is not UTF-8: {exc}") from exc
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed policy JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("policy document must be a JSON object")

    unknown = set(raw) - _ALL_KEYS
    if unknown:
        raise UnknownFieldError(f"unknown policy key {sorted(unknown)[0]!r}")
    missing = _REQUIRED_KEYS - set(raw)
    if missing:
        raise ValidationError(f"missing policy key {sorted(missing)[0]!r}")
    doc = dict(_OPTIONAL_DEFAULTS)
    doc.update(raw)

    _require(isinstance(doc["id"], str) and doc["id"] != "", "id must be a non-empty string")
    _require(isinstance(doc["version"], str) and doc["version"] != "", "version must be a non-empty string")

    whitelist = _keyword_list(doc["topic_whitelist"], "topic_whitelist")
    blacklist = _keyword_list(doc["topic_blacklist"], "topic_blacklist")

    pii = tuple(_parse_pii(p, i) for i, p in enumerate(_as_list(doc["pii_patterns"], "pii_patterns")))
    indicators = tuple(_parse_indicator(r, i) for i, r in enumerate(_as_list(doc["risk_indicators"], "risk_indicators")))
    templates = tuple(_parse_template(t, i) for i, t in enumerate(_as_list(doc["templates"], "templates")))

    for label, value in (("risk_threshold_modify", doc["risk_threshold_modify"]),
                         ("risk_threshold_reject", doc["risk_threshold_reject"])):
        _require(isinstance(value, (int, float)) and not isinstance(value, bool) and 0 <= value <= 1,
                 f"{label} must be a real in [0,1]")
    _require(doc["risk_threshold_modify"] <= doc["risk_threshold_reject"],
             "risk_threshold_modify ≤ risk_threshold_reject")

    _require(not (set(whitelist) & set(blacklist)),
             "topic_whitelist ∩ topic_blacklist must be empty")

    _require(doc["verifier_mode"] in VERIFIER_MODES,
             f"verifier_mode must be one of {VERIFIER_MODES}")
    _require(isinstance(doc["disclose_trace"], bool), "disclose_trace must be a boolean")
    _require(isinstance(doc["rag_enabled"], bool), "rag_enabled must be a boolean")
    _require(isinstance(doc["rag_top_k"], int) and not isinstance(doc["rag_top_k"], bool) and doc["rag_top_k"] >= 1,
             "rag_top_k must be a positive integer")
    _require(isinstance(doc["human_verdict_timeout_s"], int) and not isinstance(doc["human_verdict_timeout_s"], bool)
             and doc["human_verdict_timeout_s"] >= 1,
             "human_verdict_timeout_s must be a positive integer")

    route = tuple(_str_list(doc["fm_route"], "fm_route"))
    _require(len(route) >= 1, "fm_route must be non-empty")
    if adapter_ids is not None:
        for fm_id in route:
            _require(fm_id in adapter_ids, f"fm_route id {fm_id!r} does not resolve to a registered adapter")

    template_ids = [t.id for t in templates]
    _require(len(template_ids) == len(set(template_ids)), "template ids must be unique")
    pii_names = [p.name for p in pii]
    _require(len(pii_names) == len(set(pii_names)), "pii pattern names must be unique")
    indicator_ids = [r.id for r in indicators]
    _require(len(indicator_ids) == len(set(indicator_ids)), "risk indicator ids must be unique")

    return Policy(
        id=doc["id"],
        version=doc["version"],
        topic_whitelist=whitelist,
        topic_blacklist=blacklist,
        pii_patterns=pii,
        risk_indicators=indicators,
        risk_threshold_modify=float(doc["risk_threshold_modify"]),
        risk_threshold_reject=float(doc["risk_threshold_reject"]),
        verifier_mode=doc["verifier_mode"],
        disclose_trace=doc["disclose_trace"],
        fm_route=route,
        rag_enabled=doc["rag_enabled"],
        rag_top_k=doc["rag_top_k"],
        human_verdict_timeout_s=doc["human_verdict_timeout_s"],
        templates=templates,
    )


def _as_list(value, label: str) -> list:
    if not isinstance(value, list):
        raise ValidationError(f"{label} must be a list")
    return value


def policy_to_dict(policy: Policy) -> dict:
    return {
        "id": policy.id,
        "version": policy.version,
        "topic_whitelist": list(policy.topic_whitelist),
        "topic_blacklist": list(policy.topic_blacklist),
        "pii_patterns": [
            {"name": p.name, "pattern": p.pattern, "replacement_tag": p.replacement_tag}
            for p in policy.pii_patterns
        ],
        "risk_indicators": [
            {"id": r.id, "weight": r.weight, "matcher": list(r.matcher), "description": r.description}
            for r in policy.risk_indicators
        ],
        "risk_threshold_modify": policy.risk_threshold_modify,
        "risk_threshold_reject": policy.risk_threshold_reject,
        "verifier_mode": policy.verifier_mode,
        "disclose_trace": policy.disclose_trace,
        "fm_route": list(policy.fm_route),
        "rag_enabled": policy.rag_enabled,
        "rag_top_k": policy.rag_top_k,
        "human_verdict_timeout_s": policy.human_verdict_timeout_s,
        "templates": [
            {
                "id": t.id,
                "body": t.body,
                "required_vars": sorted(t.required_vars),
                "output_format_note": t.output_format_note,
            }
            for t in policy.templates
        ],
    }


def serialize_policy(policy: Policy) -> bytes:
    """Canonical form: sorted keys, UTF-8, LF terminated."""
    return canonical_json_bytes(policy_to_dict(policy)) + b"\n"


def render_prompt(template: PromptTemplate, variables: dict[str, str]) -> str:
    """Substitute ``{{name}}`` placeholders and append the format note.

    The variable map must cover required_vars exactly: a missing name raises
    MissingVariable, an unexpected one ExtraVariable. The note is appended
    after a single newline.
    """
    for name in sorted(template.required_vars):
        if name not in variables:
            raise MissingVariable(name)
    for name in sorted(variables):
        if name not in template.required_vars:
            raise ExtraVariable(name)
    rendered = _PLACEHOLDER_RE.sub(lambda m: variables[m.group(1)], template.body)
    return rendered + "\n" + template.output_format_note
