import random
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmgateway.guardrails import (
    DECISION_ALLOW,
    DECISION_ALLOW_REDACTED,
    DECISION_REJECT,
    REASON_BLACKLISTED,
    REASON_OFF_TOPIC,
    REASON_PII_UNREDACTABLE,
    SCOPE_BLACKLISTED,
    SCOPE_IN,
    SCOPE_OFF_TOPIC,
    check_topic_scope,
    evaluate,
    redact_pii,
)
from fmgateway.policy import PiiPattern

from conftest import EMAIL_PATTERN, PHONE_PATTERN, make_policy

EMAIL = PiiPattern(**EMAIL_PATTERN)
PHONE = PiiPattern(**PHONE_PATTERN)


class TestTopicScope:
    def test_case_insensitive_whitelist_hit(self):
        assert check_topic_scope("Tell me about LOAN risk", ["loan"], []) == SCOPE_IN

    def test_no_hit_is_off_topic(self):
        assert check_topic_scope("weather today?", ["loan", "credit"], []) == SCOPE_OFF_TOPIC

    def test_whole_word_boundary(self):
        assert check_topic_scope("loansharking", ["loan"], []) == SCOPE_OFF_TOPIC

    def test_blacklist_dominates_whitelist(self):
        assert check_topic_scope("loan bomb", ["loan"], ["bomb"]) == SCOPE_BLACKLISTED

    def test_empty_whitelist_means_all_in_scope(self):
        assert check_topic_scope("anything at all", [], []) == SCOPE_IN


class TestRedactPii:
    def test_two_sequential_matches(self):
        text, redactions = redact_pii("a@b.co and c@d.co", [EMAIL])
        assert text == "[EMAIL_1] and [EMAIL_2]"
        assert [(r.pattern_name, r.ordinal) for r in redactions] == [("EMAIL", 1), ("EMAIL", 2)]

    def test_no_match_is_identity(self):
        text, redactions = redact_pii("nothing personal", [EMAIL, PHONE])
        assert text == "nothing personal"
        assert redactions == []

    def test_ordinals_count_per_pattern(self):
        text, _ = redact_pii("a@b.co 555-123-4567 c@d.co", [EMAIL, PHONE])
        assert text == "[EMAIL_1] [PHONE_1] [EMAIL_2]"

    def test_spans_index_into_input(self):
        source = "mail a@b.co now"
        _, redactions = redact_pii(source, [EMAIL])
        r = redactions[0]
        assert source[r.start:r.end] == "a@b.co"

    # Brute-force oracle: enumerate every (start, end) span of the input,
    # keep spans some pattern fullmatches, then greedily select
    # leftmost-longest (pattern order breaks exact ties).
    @staticmethod
    def _oracle(text, patterns):
        compiled = [(p, re.compile(p.pattern)) for p in patterns]
        candidates = []
        for start in range(len(text)):
            for idx, (spec, rx) in enumerate(compiled):
                best_end = None
                for end in range(start + 1, len(text) + 1):
                    if rx.fullmatch(text, start, end):
                        best_end = end
                if best_end is not None:
                    candidates.append((start, -(best_end - start), idx, best_end))
        candidates.sort()
        chosen = []
        cursor = 0
        for start, neg_len, idx, end in candidates:
            if start >= cursor:
                chosen.append((start, end, idx))
                cursor = end
        counters = {}
        out = []
        cursor = 0
        selected = []
        for start, end, idx in chosen:
            spec = patterns[idx]
            n = counters.get(spec.name, 0) + 1
            counters[spec.name] = n
            out.append(text[cursor:start])
            out.append(spec.replacement_tag.replace("{n}", str(n)))
            selected.append((spec.name, n, start, end))
            cursor = end
        out.append(text[cursor:])
        return "".join(out), selected

    def test_overlapping_candidates_leftmost_longest_vs_bruteforce(self):
        # Deliberately overlapping pattern pair: short codes inside longer ids.
        short = PiiPattern(name="SHORT", pattern=r"x\d{2}", replacement_tag="[S{n}]")
        longp = PiiPattern(name="LONG", pattern=r"x\d{2,4}", replacement_tag="[L{n}]")
        rng = random.Random(7)
        alphabet = "x0 1a"
        for _ in range(300):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 64)))
            for patterns in ([short, longp], [longp, short], [EMAIL, PHONE]):
                got_text, got = redact_pii(text, patterns)
                want_text, want = self._oracle(text, patterns)
                assert got_text == want_text, (text, patterns)
                assert [(r.pattern_name, r.ordinal, r.start, r.end) for r in got] == want

    @given(st.text(alphabet="ab@. c5-", max_size=48))
    def test_redaction_fixpoint(self, text):
        redacted, first = redact_pii(text, [EMAIL, PHONE])
        again, second = redact_pii(redacted, [EMAIL, PHONE])
        assert again == redacted
        assert second == []


class TestEvaluate:
    def test_pre_stage_blacklist_reject(self):
        policy = make_policy(topic_blacklist=["bomb"])
        verdict = evaluate("pre", "how to build a bomb", policy)
        assert verdict.decision == DECISION_REJECT
        assert verdict.reason_code == REASON_BLACKLISTED

    def test_pre_stage_whitelist_allow(self):
        policy = make_policy(topic_whitelist=["risk", "fairness"])
        verdict = evaluate("pre", "assess fairness risk", policy)
        assert verdict.decision == DECISION_ALLOW
        assert verdict.output_text == "assess fairness risk"
        assert verdict.redactions == ()

    def test_pre_stage_off_topic_reject(self):
        policy = make_policy(topic_whitelist=["loan"])
        verdict = evaluate("pre", "sports scores", policy)
        assert verdict.decision == DECISION_REJECT
        assert verdict.reason_code == REASON_OFF_TOPIC

    def test_post_stage_redaction(self):
        policy = make_policy(pii_patterns=[EMAIL_PATTERN])
        verdict = evaluate("post", "contact john@example.com", policy)
        assert verdict.decision == DECISION_ALLOW_REDACTED
        assert verdict.output_text == "contact [EMAIL_1]"
        assert len(verdict.redactions) == 1

    def test_mid_stage_skips_topic_scope(self):
        policy = make_policy(topic_whitelist=["loan"])
        verdict = evaluate("mid", "weather is unrelated", policy)
        assert verdict.decision == DECISION_ALLOW

    def test_post_stage_skips_topic_scope(self):
        policy = make_policy(topic_whitelist=["loan"])
        assert evaluate("post", "off topic text", policy).decision == DECISION_ALLOW

    def test_blacklist_dominance_over_whitelist(self):
        policy = make_policy(topic_whitelist=["loan"], topic_blacklist=["fraud"])
        verdict = evaluate("pre", "loan fraud tricks", policy)
        assert verdict.decision == DECISION_REJECT
        assert verdict.reason_code == REASON_BLACKLISTED

    def test_unredactable_when_tag_retriggers_pattern(self):
        trap = {"name": "TRAP", "pattern": r"secret\w*", "replacement_tag": "secret_{n}"}
        policy = make_policy(pii_patterns=[trap])
        verdict = evaluate("post", "a secret42 leaked", policy)
        assert verdict.decision == DECISION_REJECT
        assert verdict.reason_code == REASON_PII_UNREDACTABLE

    def test_unknown_stage_raises(self):
        with pytest.raises(ValueError):
            evaluate("side", "text", make_policy())
