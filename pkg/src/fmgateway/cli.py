"""Operator CLI.

Subcommands: serve (run the HTTP gateway), check-policy (validate a policy
document), verify-audit (chain verification), export-audit (JSON Lines
dump), and report (delimited summary plus rendered figures).
"""

from __future__ import annotations

import argparse
import json
import sys

from .clock import SystemClock
from .config import GatewayConfig, build_runtime
from .errors import GatewayError
from .policy import load_policy
from .recorder import BlackBoxRecorder, FileAuditStore
from .reporting import generate_report, write_report_bundle


def _open_recorder(store_path: str) -> BlackBoxRecorder:
    return BlackBoxRecorder(FileAuditStore(store_path), SystemClock(), location="cli")


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import build_app

    config = GatewayConfig.from_file(args.config)
    runtime = build_runtime(config)
    app = build_app(runtime)
    print(f"serving on {config.listen_host}:{config.listen_port} (location={config.location})")
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")
    return 0


def _cmd_check_policy(args) -> int:
    try:
        with open(args.path, "rb") as fh:
            policy = load_policy(fh.read())
    except OSError as exc:
        print(f"error: cannot read {args.path}: {exc}", file=sys.stderr)
        return 1
    except GatewayError as exc:
        print(f"invalid policy: [{exc.code}] {exc.message}", file=sys.stderr)
        return 1
    print(f"policy ok: id={policy.id} version={policy.version} "
          f"templates={len(policy.templates)} route={list(policy.fm_route)}")
    return 0


def _cmd_verify_audit(args) -> int:
    recorder = _open_recorder(args.store)
    try:
        bad = recorder.verify_chain()
    finally:
        recorder.close()
    if bad is None:
        print(f"chain OK: {len(recorder)} events")
        return 0
    print(f"chain BROKEN: first bad seq {bad}", file=sys.stderr)
    return 1


def _parse_range(text: str) -> tuple[int, int | None]:
    if text == "all":
        return 0, None
    if ":" in text:
        lo, hi = text.split(":", 1)
        return int(lo), int(hi)
    value = int(text)
    return value, value


def _cmd_export_audit(args) -> int:
    recorder = _open_recorder(args.store)
    try:
        from_seq, to_seq = _parse_range(args.range)
        data = recorder.export_jsonl(from_seq=from_seq, to_seq=to_seq)
    except GatewayError as exc:
        print(f"error: [{exc.code}] {exc.message}", file=sys.stderr)
        return 1
    finally:
        recorder.close()
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
        print(f"wrote {len(data)} bytes to {args.out}")
    else:
        sys.stdout.buffer.write(data)
    return 0


def _cmd_report(args) -> int:
    if "/" not in args.period:
        print("error: period must be START/END (RFC 3339 timestamps)", file=sys.stderr)
        return 1
    start, end = args.period.split("/", 1)
    recorder = _open_recorder(args.store)
    try:
        report = generate_report(recorder, start, end, SystemClock(), process_notes=args.notes)
    except GatewayError as exc:
        print(f"error: [{exc.code}] {exc.message}", file=sys.stderr)
        return 1
    finally:
        recorder.close()
    paths = write_report_bundle(report, args.outdir)
    print(json.dumps(report.to_dict()["totals"], indent=2, sort_keys=True))
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmgateway", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--config", required=True, help="path to the gateway config JSON")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("check-policy", help="validate a policy document")
    p.add_argument("path")
    p.set_defaults(func=_cmd_check_policy)

    p = sub.add_parser("verify-audit", help="verify an audit store's hash chain")
    p.add_argument("store")
    p.set_defaults(func=_cmd_verify_audit)

    p = sub.add_parser("export-audit", help="export an audit store as JSON Lines")
    p.add_argument("store")
    p.add_argument("range", help="'all', 'FROM:TO', or a single seq")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=_cmd_export_audit)

    p = sub.add_parser("report", help="aggregate a period into CSV + figures")
    p.add_argument("store")
    p.add_argument("period", help="START/END, RFC 3339")
    p.add_argument("--outdir", default="report_out")
    p.add_argument("--notes", default="", help="free-text process notes for stakeholders")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
