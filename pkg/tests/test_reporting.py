import csv
import io
import random

import pytest

from fmgateway.clock import format_timestamp
from fmgateway.errors import RangeError
from fmgateway.orchestrator import PromptRequest
from fmgateway.reporting import generate_report, render_report_figures, report_to_csv, write_report_bundle

from conftest import EMAIL_PATTERN, Stack, aggregate_export_oracle, make_policy

INDICATORS = [
    {"id": "surv", "weight": 0.45, "matcher": ["surveillance"], "description": ""},
    {"id": "wpn", "weight": 0.95, "matcher": ["weapon"], "description": ""},
]


def traffic_policy(verifier_mode="automatic"):
    return make_policy(
        topic_blacklist=["bomb"],
        pii_patterns=[EMAIL_PATTERN],
        risk_indicators=INDICATORS,
        risk_threshold_modify=0.4,
        risk_threshold_reject=0.9,
        verifier_mode=verifier_mode,
        human_verdict_timeout_s=600,
    )


def drive_traffic(stack, rng, n):
    """Mixed scenarios: delivered, rejected (several reasons), held,
    human-approved/rejected, and timeouts."""
    auto = traffic_policy("automatic")
    human = traffic_policy("human")
    for i in range(n):
        kind = rng.choice(["ok", "ok", "blacklist", "risk", "pii", "approve", "hreject", "timeout", "hold"])
        rid = f"tr-{i}"
        if kind == "ok":
            q, policy = "plain question", auto
        elif kind == "blacklist":
            q, policy = "a bomb question", auto
        elif kind == "risk":
            q, policy = "weapon export", auto
        elif kind == "pii":
            q, policy = "mail a@b.co please", auto
        else:
            q, policy = "needs review", human
        response = stack.orchestrator.handle_request(
            PromptRequest(request_id=rid, principal="alice", mode="simple",
                          template_id="qa", variables={"q": q}), policy=policy)
        if response.status == "held":
            if kind == "approve":
                stack.orchestrator.apply_verdict(response.task_id, "approve", "vera")
            elif kind == "hreject":
                stack.orchestrator.apply_verdict(response.task_id, "reject", "vera", reason="quality")
            elif kind == "timeout":
                stack.clock.advance(601)
                stack.orchestrator.expire_overdue()
            # "hold": leave pending
        stack.clock.advance(rng.randint(1, 30))


def make_stack():
    stack = Stack(policy=traffic_policy())
    stack.add_backend("echo-1")
    return stack


class TestGenerateReport:
    def period_for(self, stack):
        events = stack.recorder.events()
        start = events[0].timestamp_utc if events else "2026-01-01T00:00:00.000Z"
        stack.clock.advance(3600)
        return start, format_timestamp(stack.clock.now())

    def test_empty_log_all_zero(self):
        stack = make_stack()
        report = generate_report(stack.recorder, "2026-01-01T00:00:00Z",
                                 "2026-02-01T00:00:00Z", stack.clock)
        assert report.requests == 0
        assert report.delivered == 0
        assert report.held == 0
        assert report.rejected_by_reason == {}
        assert report.risk_score_histogram == [0] * 10
        assert report.fm_calls_by_fm_id == {}

    def test_one_delivered_request(self):
        stack = make_stack()
        stack.orchestrator.handle_request(PromptRequest(
            request_id="r1", principal="alice", mode="simple",
            template_id="qa", variables={"q": "hello"}))
        start, end = self.period_for(stack)
        report = generate_report(stack.recorder, start, end, stack.clock)
        assert report.requests == 1
        assert report.delivered == 1
        assert report.rejected_total == 0
        assert report.fm_calls_by_fm_id == {"echo-1": 1}

    def test_conservation_and_oracle_equality(self):
        rng = random.Random(53)
        stack = make_stack()
        drive_traffic(stack, rng, 60)
        start, end = self.period_for(stack)
        report = generate_report(stack.recorder, start, end, stack.clock)
        assert report.delivered + report.rejected_total + report.held == report.requests
        oracle = aggregate_export_oracle(stack.recorder.export_jsonl(), start, end)
        assert report.to_dict()["totals"] == oracle

    def test_deterministic_for_fixed_log(self):
        stack = make_stack()
        drive_traffic(stack, random.Random(3), 20)
        start, end = self.period_for(stack)
        a = generate_report(stack.recorder, start, end, stack.clock)
        b = generate_report(stack.recorder, start, end, stack.clock)
        assert a.to_dict()["totals"] == b.to_dict()["totals"]

    def test_bad_period_raises(self):
        stack = make_stack()
        with pytest.raises(RangeError):
            generate_report(stack.recorder, "2026-02-01T00:00:00Z", "2026-01-01T00:00:00Z", stack.clock)
        with pytest.raises(RangeError):
            generate_report(stack.recorder, "whenever", "2026-01-01T00:00:00Z", stack.clock)

    def test_process_notes_passthrough(self):
        stack = make_stack()
        report = generate_report(stack.recorder, "2026-01-01T00:00:00Z",
                                 "2026-02-01T00:00:00Z", stack.clock, process_notes="built by team X")
        assert report.to_dict()["process_notes"] == "built by team X"


class TestReportOutputs:
    def build_report(self):
        stack = make_stack()
        drive_traffic(stack, random.Random(7), 30)
        events = stack.recorder.events()
        start = events[0].timestamp_utc
        stack.clock.advance(3600)
        return generate_report(stack.recorder, start, format_timestamp(stack.clock.now()), stack.clock)

    def test_csv_round_trips_totals(self):
        report = self.build_report()
        rows = list(csv.reader(io.StringIO(report_to_csv(report))))
        assert rows[0] == ["section", "key", "value"]
        table = {(section, key): value for section, key, value in rows[1:]}
        assert table[("totals", "requests")] == str(report.requests)
        assert table[("totals", "delivered")] == str(report.delivered)
        assert table[("totals", "held")] == str(report.held)
        hist_rows = [(k, v) for (s, k), v in table.items() if s == "risk_score_histogram"]
        assert len(hist_rows) == 10

    def test_figures_rendered_to_files(self, tmp_path):
        report = self.build_report()
        paths = render_report_figures(report, str(tmp_path))
        assert set(paths) == {"risk_histogram", "rejections_by_reason", "fm_calls_by_fm_id"}
        for path in paths.values():
            with open(path, "rb") as fh:
                assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    def test_bundle_writes_json_csv_and_figures(self, tmp_path):
        import json

        report = self.build_report()
        paths = write_report_bundle(report, str(tmp_path / "out"))
        assert set(paths) == {"risk_histogram", "rejections_by_reason", "fm_calls_by_fm_id",
                              "report_json", "report_csv"}
        with open(paths["report_json"], encoding="utf-8") as fh:
            assert json.load(fh)["totals"]["requests"] == report.requests
