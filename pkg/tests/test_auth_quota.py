import random

import pytest

from fmgateway.auth import KeyTable, Principal, QuotaWindow, require_scope
from fmgateway.clock import ManualClock
from fmgateway.errors import Forbidden, Unauthorized, ValidationError

KEYS = [
    {"api_key": "sk-alice", "key_id": "alice", "display_name": "Alice",
     "scopes": ["complete", "ingest"], "quota_per_hour": 2},
    {"api_key": "sk-root", "key_id": "root", "display_name": "Root",
     "scopes": ["complete", "ingest", "verify", "admin"], "quota_per_hour": 1000},
]


class TestAuthenticate:
    def test_valid_key(self):
        table = KeyTable(KEYS)
        principal = table.authenticate("sk-alice")
        assert principal.key_id == "alice"
        assert principal.scopes == frozenset({"complete", "ingest"})

    def test_unknown_key(self):
        with pytest.raises(Unauthorized):
            KeyTable(KEYS).authenticate("sk-nope")

    def test_missing_key(self):
        with pytest.raises(Unauthorized):
            KeyTable(KEYS).authenticate(None)

    def test_scope_enforcement(self):
        principal = KeyTable(KEYS).authenticate("sk-alice")
        require_scope(principal, "complete")
        with pytest.raises(Forbidden):
            require_scope(principal, "admin")

    def test_bad_scope_config_rejected(self):
        with pytest.raises(ValidationError):
            KeyTable([{"api_key": "k", "key_id": "x", "scopes": ["sudo"]}])


class TestQuotaWindow:
    def principal(self, quota=2):
        return Principal(key_id="alice", display_name="Alice",
                         scopes=frozenset({"complete"}), quota_per_hour=quota)

    def test_third_request_within_window_denied(self):
        clock = ManualClock()
        window = QuotaWindow(clock)
        p = self.principal(quota=2)
        for _ in range(2):
            assert window.check(p)
            window.record(p)
        assert not window.check(p)

    def test_allowed_again_after_window_passes(self):
        clock = ManualClock()
        window = QuotaWindow(clock)
        p = self.principal(quota=2)
        for _ in range(2):
            window.record(p)
        assert not window.check(p)
        clock.advance(3601)
        assert window.check(p)

    def test_counting_matches_timestamp_filter_oracle(self):
        rng = random.Random(41)
        clock = ManualClock()
        window = QuotaWindow(clock)
        p = self.principal(quota=10_000)
        admissions = []
        for _ in range(500):
            clock.advance(rng.randint(0, 300))
            if rng.random() < 0.8:
                window.record(p)
                admissions.append(clock.now().timestamp())
            now = clock.now().timestamp()
            expected = sum(1 for t in admissions if t > now - 3600)
            assert window.count("alice") == expected
