"""Deterministic JSON reports, atomic writes and the frozen constants manifest."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
import tempfile
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "SCHEMA_KEYS",
    "load_manifest",
    "manifest_version",
    "clean",
    "build_report",
    "dumps",
    "write_atomic",
    "write_report",
    "rows_to_csv",
    "strip_timestamp",
    "merge_reports",
]

SCHEMA_KEYS = ("quantity", "params", "grid", "worst", "argmax", "pass", "sweep")


@lru_cache(maxsize=1)
def load_manifest() -> dict:
    text = resources.files("kgescape").joinpath("data/constants.json").read_text()
    return json.loads(text)


def manifest_version() -> str:
    return str(load_manifest().get("version", "unversioned"))


def clean(obj):
    """Plain JSON types; non-finite floats become the strings inf, -inf, nan."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, complex):
        return [clean(obj.real), clean(obj.imag)]
    return obj


def build_report(payload: dict, config: dict | None = None, timestamp: bool = True) -> dict:
    """Schema keys first (None when absent), then the rest in insertion order."""
    payload = dict(payload)
    out = {k: payload.pop(k, None) for k in SCHEMA_KEYS}
    if out["sweep"] is None:
        out["sweep"] = []
    out.update(payload)
    out["config"] = config
    out["constants_version"] = manifest_version()
    if timestamp:
        out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return clean(out)


def dumps(report: dict) -> str:
    return json.dumps(clean(report), indent=2) + "\n"


def write_atomic(path, text: str) -> Path:
    """Temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_report(report: dict, path) -> Path:
    return write_atomic(path, dumps(report))


def rows_to_csv(rows: list[dict]) -> str:
    """Flat CSV of a list of row dicts; nested values are JSON-encoded."""
    rows = clean(rows)
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([json.dumps(r[k]) if isinstance(r.get(k), (dict, list)) else r.get(k, "") for k in cols])
    return buf.getvalue()


def strip_timestamp(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timestamp"}


def merge_reports(paths) -> dict:
    """One summary over several report files; passes iff every input passes."""
    entries = []
    for p in sorted(Path(p) for p in paths):
        rep = json.loads(Path(p).read_text())
        entries.append({"file": p.name, "quantity": rep.get("quantity"), "pass": bool(rep.get("pass")),
                        "constants_version": rep.get("constants_version")})
    return {
        "quantity": "merged",
        "worst": sum(1 for e in entries if not e["pass"]),
        "pass": all(e["pass"] for e in entries) and bool(entries),
        "sweep": entries,
    }
