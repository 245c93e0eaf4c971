"""Batch driver.

Exit codes: 0 all requested checks pass, 1 a check failed, 2 configuration
error, 3 computation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import campaigns
from .config import ConfigError, load_config
from .estimates import AssemblyError, ConstantMissingError, HypothesisViolation
from .flow import FlowError, NotNullError
from .geometry import GeometryError
from .probe import NonHermitianError
from .quantize import GridError
from .reports import build_report, merge_reports, rows_to_csv, write_atomic, write_report
from .symbols import ParameterError

log = logging.getLogger("kgescape")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3

COMPUTE_ERRORS = (FlowError, NotNullError, GeometryError, GridError, AssemblyError, ConstantMissingError,
                  HypothesisViolation, NonHermitianError, ParameterError, np.linalg.LinAlgError,
                  FloatingPointError, MemoryError)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgescape", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    groups = ap.add_subparsers(dest="group", required=True)
    actions = {}
    for group, action in campaigns.COMMANDS:
        actions.setdefault(group, []).append(action)
    for group, acts in actions.items():
        gp = groups.add_parser(group)
        sub = gp.add_subparsers(dest="action", required=True)
        for act in acts:
            p = sub.add_parser(act)
            p.add_argument("--config", required=True, type=Path)
            _common(p)
    rp = groups.add_parser("report")
    rsub = rp.add_subparsers(dest="action", required=True)
    mp = rsub.add_parser("merge")
    mp.add_argument("inputs", nargs="+", type=Path, help="report files or directories")
    _common(mp)
    return ap


def _common(p):
    p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")


def _merge(args) -> int:
    files = []
    for p in args.inputs:
        files.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    try:
        payload = merge_reports(files)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(".")
    report = build_report(payload, None, timestamp=not args.no_timestamp)
    write_report(report, out / "merged.json")
    print(f"report merge: {'PASS' if report['pass'] else 'FAIL'} ({len(payload['sweep'])} reports)")
    return EXIT_OK if report["pass"] else EXIT_CHECK


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.group == "report":
        return _merge(args)
    name = f"{args.group} {args.action}"
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fn = campaigns.COMMANDS[(args.group, args.action)]
    try:
        if fn is campaigns.nontrap_scan:
            payload, artifacts = fn(cfg, jobs=max(1, args.jobs))
        else:
            payload, artifacts = fn(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except COMPUTE_ERRORS as exc:
        print(f"computation failed in {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    out = args.out or Path(cfg.output.directory)
    formats = [args.format] if args.format else list(cfg.output.formats)
    stem = f"{args.group}_{args.action}"
    report = build_report(payload, cfg.model_dump(mode="json"), timestamp=not args.no_timestamp)
    write_report(report, out / f"{stem}.json")
    for fname, text in artifacts.items():
        if "csv" in formats or not fname.endswith(".csv"):
            write_atomic(out / f"{stem}_{fname}", text)
    if "csv" in formats and isinstance(report.get("sweep"), list) and report["sweep"]:
        if all(isinstance(r, dict) for r in report["sweep"]):
            write_atomic(out / f"{stem}_sweep.csv", rows_to_csv(report["sweep"]))
    status = "PASS" if report["pass"] else "FAIL"
    detail = "" if report["pass"] else f" (first failing check: {report.get('argmax')!s:.80})"
    print(f"{name}: {status}{detail}")
    log.debug(json.dumps({"written": str(out / f'{stem}.json')}))
    return EXIT_OK if report["pass"] else EXIT_CHECK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
