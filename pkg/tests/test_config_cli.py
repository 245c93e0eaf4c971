import json
from pathlib import Path

import pytest

from kgescape.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, run
from kgescape.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def test_missing_mu_named():
    with pytest.raises(ConfigError, match="metric.mu"):
        parse_config({"metric": {"dimension": 2}})


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="metric.colour"):
        parse_config({"metric": {"dimension": 2, "mu": 0.5, "colour": 1}})


def test_ring_needs_three_dimensions():
    with pytest.raises(ConfigError, match="ring_trap"):
        parse_config({"metric": {"dimension": 2, "mu": 0.5, "perturbation": {"family": "ring_trap"}}})


def test_power_decay_uses_mu():
    cfg = parse_config({"metric": {"dimension": 2, "mu": 0.3,
                                   "perturbation": {"family": "power_decay", "amplitude": 0.1}}})
    assert cfg.metric.build().mu == 0.3


def test_json_and_toml_agree(tmp_path):
    cfg = load_config(CONFIGS / "minkowski.toml")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.model_dump(mode="json")))
    assert load_config(p) == cfg


def test_unreadable_config():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.toml")


def test_cli_config_error_exit(tmp_path, capsys):
    code = run(["escape", "verify", "--config", str(CONFIGS / "missing_mu.toml"), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "metric.mu" in capsys.readouterr().err


def test_cli_flow_trace_writes_outputs(tmp_path, capsys):
    code = run(["flow", "trace", "--config", str(CONFIGS / "minkowski.toml"), "--out", str(tmp_path),
                "--format", "csv", "--no-timestamp"])
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "flow_trace.json").read_text())
    assert rep["pass"] and "timestamp" not in rep
    assert (tmp_path / "flow_trace_trajectory.csv").read_text().startswith("t,y_1,y_2,")
    assert "flow trace: PASS" in capsys.readouterr().out


def test_cli_compute_error_exit(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('[metric]\ndimension = 1\nmu = 0.5\n[grid]\nN = 100\n')
    code = run(["quantize", "check", "--config", str(bad), "--out", str(tmp_path)])
    assert code == EXIT_COMPUTE


def test_cli_merge(tmp_path):
    run(["flow", "trace", "--config", str(CONFIGS / "minkowski.toml"), "--out", str(tmp_path), "--no-timestamp"])
    code = run(["report", "merge", str(tmp_path), "--out", str(tmp_path / "m")])
    assert code == EXIT_OK
    assert json.loads((tmp_path / "m" / "merged.json").read_text())["pass"]


@pytest.mark.slow
def test_ring_trap_fails_only_nontrapping(tmp_path):
    conf = str(CONFIGS / "ring_trap.toml")
    assert run(["escape", "verify", "--config", conf, "--out", str(tmp_path)]) == EXIT_OK
    assert run(["nontrap", "scan", "--config", conf, "--out", str(tmp_path)]) == 1
    rep = json.loads((tmp_path / "nontrap_scan.json").read_text())
    assert rep["counts"]["Trapped"] == 1 and rep["argmax"]["origin"] == "family_orbit"
