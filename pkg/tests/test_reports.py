import json

import numpy as np

from kgescape.reports import (SCHEMA_KEYS, build_report, clean, dumps, load_manifest, merge_reports, rows_to_csv,
                              strip_timestamp, write_atomic, write_report)


def test_clean_handles_numpy_and_nonfinite():
    out = clean({"a": np.float64(1.5), "b": np.arange(3), "c": np.inf, "d": np.nan, "e": np.bool_(True)})
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": "inf", "d": "nan", "e": True}
    json.dumps(out)


def test_schema_keys_lead():
    rep = build_report({"extra": 1, "pass": True, "quantity": "q"}, {"seed": 0})
    assert tuple(rep)[: len(SCHEMA_KEYS)] == SCHEMA_KEYS
    assert rep["sweep"] == [] and "timestamp" in rep
    assert rep["constants_version"] == load_manifest()["version"]


def test_without_timestamp_is_reproducible():
    a = dumps(build_report({"quantity": "q", "pass": True}, None, timestamp=False))
    b = dumps(strip_timestamp(build_report({"quantity": "q", "pass": True}, None)))
    assert a == b


def test_atomic_write_leaves_no_temp(tmp_path):
    path = write_atomic(tmp_path / "sub" / "x.txt", "hello")
    assert path.read_text() == "hello"
    assert [p.name for p in path.parent.iterdir()] == ["x.txt"]


def test_rows_to_csv_encodes_nested():
    text = rows_to_csv([{"a": 1, "b": [1, 2]}, {"a": 2, "c": "x"}])
    assert text.splitlines() == ["a,b,c", '1,"[1, 2]",', "2,,x"]


def test_merge(tmp_path):
    write_report(build_report({"quantity": "a", "pass": True}), tmp_path / "a.json")
    write_report(build_report({"quantity": "b", "pass": False}), tmp_path / "b.json")
    m = merge_reports([tmp_path / "b.json", tmp_path / "a.json"])
    assert [e["file"] for e in m["sweep"]] == ["a.json", "b.json"]
    assert m["pass"] is False and m["worst"] == 1
