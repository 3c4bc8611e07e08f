"""Standardised reporter: deterministic aggregation of recorder events.

A report is derived solely from audit events inside the requested period,
so two reports over the same log always agree. The CLI report path writes
the delimited summary next to rendered matplotlib figures so stakeholders
get both machine-readable and visual forms of the same numbers.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from datetime import datetime

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .clock import format_timestamp, parse_timestamp
from .errors import RangeError

HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class Report:
    period_start: str
    period_end: str
    requests: int
    delivered: int
    held: int
    rejected_by_reason: dict[str, int]
    verifier_overrides: int
    risk_score_histogram: list[int]
    fm_calls_by_fm_id: dict[str, int]
    generated_at: str
    process_notes: str = ""
    rejected_total: int = field(init=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "rejected_total", sum(self.rejected_by_reason.values()))

    def to_dict(self) -> dict:
        return {
            "period": {"start": self.period_start, "end": self.period_end},
            "totals": {
                "requests": self.requests,
                "delivered": self.delivered,
                "rejected_total": self.rejected_total,
                "rejected_by_reason": dict(sorted(self.rejected_by_reason.items())),
                "held": self.held,
                "verifier_overrides": self.verifier_overrides,
                "risk_score_histogram": list(self.risk_score_histogram),
                "fm_calls_by_fm_id": dict(sorted(self.fm_calls_by_fm_id.items())),
            },
            "generated_at": self.generated_at,
            "process_notes": self.process_notes,
        }


def histogram_bin(score: float) -> int:
    """Equal-width bins over [0,1]; 1.0 lands in the last bin."""
    return min(HISTOGRAM_BINS - 1, int(score * HISTOGRAM_BINS))


def generate_report(recorder, start: str, end: str, clock, process_notes: str = "") -> Report:
    """Aggregate events with start <= timestamp < end."""
    try:
        start_dt = parse_timestamp(start)
        end_dt = parse_timestamp(end)
    except ValueError as exc:
        raise RangeError(f"invalid period timestamp: {exc}") from exc
    if end_dt < start_dt:
        raise RangeError("period end precedes period start")

    requests = 0
    delivered = 0
    rejected: dict[str, int] = {}
    overrides = 0
    histogram = [0] * HISTOGRAM_BINS
    fm_calls: dict[str, int] = {}
    responded: set[str] = set()
    submitted: set[str] = set()

    for ev in recorder.events():
        ts = parse_timestamp(ev.timestamp_utc)
        if not (start_dt <= ts < end_dt):
            continue
        payload = ev.payload
        if ev.kind == "request_received" and payload.get("type") == "prompt":
            requests += 1
        elif ev.kind == "response_delivered" and payload.get("type") == "response":
            responded.add(payload.get("request_id"))
            if payload.get("status") == "ok":
                delivered += 1
            elif payload.get("status") == "rejected":
                reason = payload.get("reason_code") or "unspecified"
                rejected[reason] = rejected.get(reason, 0) + 1
        elif ev.kind == "verifier_submitted":
            submitted.add(payload.get("request_id"))
        elif ev.kind == "verifier_verdict":
            if payload.get("status") in ("edited", "rejected"):
                overrides += 1
        elif ev.kind == "risk_assessment":
            histogram[histogram_bin(payload.get("score", 0.0))] += 1
        elif ev.kind == "fm_call":
            fm_id = payload.get("fm_id", "unknown")
            fm_calls[fm_id] = fm_calls.get(fm_id, 0) + 1

    held = len(submitted - responded)
    return Report(
        period_start=format_timestamp(start_dt),
        period_end=format_timestamp(end_dt),
        requests=requests,
        delivered=delivered,
        held=held,
        rejected_by_reason=rejected,
        verifier_overrides=overrides,
        risk_score_histogram=histogram,
        fm_calls_by_fm_id=fm_calls,
        generated_at=format_timestamp(clock.now()),
        process_notes=process_notes,
    )


def report_rows(report: Report) -> list[tuple[str, str, str]]:
    """Flat (section, key, value) rows for the delimited export."""
    rows: list[tuple[str, str, str]] = [
        ("period", "start", report.period_start),
        ("period", "end", report.period_end),
        ("totals", "requests", str(report.requests)),
        ("totals", "delivered", str(report.delivered)),
        ("totals", "rejected_total", str(report.rejected_total)),
        ("totals", "held", str(report.held)),
        ("totals", "verifier_overrides", str(report.verifier_overrides)),
    ]
    for reason, count in sorted(report.rejected_by_reason.items()):
        rows.append(("rejected_by_reason", reason, str(count)))
    for i, count in enumerate(report.risk_score_histogram):
        lo = i / HISTOGRAM_BINS
        hi = (i + 1) / HISTOGRAM_BINS
        rows.append(("risk_score_histogram", f"[{lo:.1f},{hi:.1f})", str(count)))
    for fm_id, count in sorted(report.fm_calls_by_fm_id.items()):
        rows.append(("fm_calls_by_fm_id", fm_id, str(count)))
    rows.append(("meta", "generated_at", report.generated_at))
    if report.process_notes:
        rows.append(("meta", "process_notes", report.process_notes))
    return rows


def report_to_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "key", "value"])
    writer.writerows(report_rows(report))
    return buf.getvalue()


def render_report_figures(report: Report, outdir: str) -> dict[str, str]:
    """Render the report's distributions to PNG files; returns name->path."""
    os.makedirs(outdir, exist_ok=True)
    paths: dict[str, str] = {}

    fig, ax = plt.subplots(figsize=(7, 4))
    edges = [i / HISTOGRAM_BINS for i in range(HISTOGRAM_BINS)]
    ax.bar(edges, report.risk_score_histogram, width=1 / HISTOGRAM_BINS, align="edge",
           edgecolor="black", color="#4878a8")
    ax.set_xlabel("risk score")
    ax.set_ylabel("assessments")
    ax.set_title(f"Risk score distribution ({report.period_start} to {report.period_end})")
    ax.set_xlim(0, 1)
    path = os.path.join(outdir, "risk_histogram.png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths["risk_histogram"] = path

    fig, ax = plt.subplots(figsize=(7, 4))
    reasons = sorted(report.rejected_by_reason.items())
    labels = [r for r, _ in reasons] or ["(none)"]
    counts = [c for _, c in reasons] or [0]
    ax.barh(labels, counts, color="#a85448", edgecolor="black")
    ax.set_xlabel("rejections")
    ax.set_title("Rejections by reason")
    path = os.path.join(outdir, "rejections_by_reason.png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths["rejections_by_reason"] = path

    fig, ax = plt.subplots(figsize=(7, 4))
    calls = sorted(report.fm_calls_by_fm_id.items())
    labels = [f for f, _ in calls] or ["(none)"]
    counts = [c for _, c in calls] or [0]
    ax.bar(labels, counts, color="#5a9367", edgecolor="black")
    ax.set_ylabel("fm_call events")
    ax.set_title("FM invocations by adapter")
    ax.tick_params(axis="x", rotation=30)
    path = os.path.join(outdir, "fm_calls_by_fm_id.png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths["fm_calls_by_fm_id"] = path

    return paths


def write_report_bundle(report: Report, outdir: str) -> dict[str, str]:
    """report.json + report.csv + figures under one directory."""
    import json

    os.makedirs(outdir, exist_ok=True)
    paths = render_report_figures(report, outdir)
    json_path = os.path.join(outdir, "report.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["report_json"] = json_path
    csv_path = os.path.join(outdir, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_to_csv(report))
    paths["report_csv"] = csv_path
    return paths


def default_period(clock) -> tuple[str, str]:
    now: datetime = clock.now()
    return format_timestamp(now.replace(hour=0, minute=0, second=0, microsecond=0)), format_timestamp(now)
