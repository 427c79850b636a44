import json
import subprocess
import sys
import time

import pytest

from tunekit.agent import Component
from tunekit.channel import Transport
from tunekit.experiment.cli import main
from tunekit.experiment.store import load_runs
from tunekit.tunables import ComponentSpec, MetricDef, TunableDef


def write_config(tmp_path, **overrides):
    doc = {
        "benchmark": "synthetic",
        "workload": {"name": "separable", "function": "separable", "dim": 2},
        "objective": {"metric": "value", "direction": "minimize"},
        "optimizer": {"kind": "rs", "seed": 4, "budget": 6},
        "out": "runs.jsonl",
    }
    doc.update(overrides)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def runs_file(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["optimize", "--config", str(cfg)]) == 0
    return tmp_path / "runs.jsonl"


def test_optimize_appends_budget_runs(tmp_path, capsys):
    assert main(["optimize", "--config", str(write_config(tmp_path))]) == 0
    records = load_runs(tmp_path / "runs.jsonl")
    assert [r.iteration for r in records] == list(range(6))
    best = min(r.objective["value"] for r in records)
    assert f"best value={best:.6g}" in capsys.readouterr().out


def test_optimize_out_override(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "other.jsonl")]) == 0
    assert len(load_runs(tmp_path / "other.jsonl")) == 6


def test_optimize_without_store_is_usage_error(tmp_path):
    doc = json.loads(write_config(tmp_path).read_text())
    del doc["out"]
    (tmp_path / "exp.json").write_text(json.dumps(doc))
    assert main(["optimize", "--config", str(tmp_path / "exp.json")]) == 1


def test_run_prints_record_at_assignment(tmp_path, capsys):
    cfg = write_config(tmp_path, assignment={"x0": 0.3, "x1": 0.7})
    assert main(["run", "--config", str(cfg)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["assignment"] == {"x0": 0.3, "x1": 0.7}
    assert doc["objective"]["value"] == pytest.approx(0.3**2 + 0.7**2)
    assert not (tmp_path / "runs.jsonl").exists()


def test_run_invalid_assignment(tmp_path):
    cfg = write_config(tmp_path, assignment={"x0": 3.0})
    assert main(["run", "--config", str(cfg)]) == 1


@pytest.mark.parametrize("fmt", ["table", "json", "csv"])
def test_report_formats(runs_file, capsys, fmt):
    capsys.readouterr()
    assert main(["report", "--runs", str(runs_file), "--format", fmt]) == 0
    out = capsys.readouterr().out
    if fmt == "json":
        assert len(json.loads(out)["episodes"]) == 1
    elif fmt == "csv":
        assert len(out.strip().splitlines()) == 7
    else:
        assert "comparison" in out


def test_report_empty_store(tmp_path):
    (tmp_path / "empty.jsonl").touch()
    assert main(["report", "--runs", str(tmp_path / "empty.jsonl")]) == 1


def test_rpi_learn_then_check(runs_file, tmp_path, capsys):
    rpi_path = tmp_path / "rpi.json"
    assert main(["rpi", "learn", "--runs", str(runs_file), "--margin", "0.5", "--out", str(rpi_path)]) == 0
    assert main(["rpi", "check", "--runs", str(runs_file), "--rpi", str(rpi_path)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["verdict"] == "pass" and summary["checked"] == 6


def test_rpi_check_violation(runs_file, tmp_path, capsys):
    rpi_path = tmp_path / "rpi.json"
    rpi_path.write_text(json.dumps({"component": "synthetic", "workload": "separable", "caps": {"cpu_ns_max": 1}}))
    assert main(["rpi", "check", "--runs", str(runs_file), "--rpi", str(rpi_path)]) == 2
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert len(summary["failures"]) == 6


@pytest.mark.parametrize("broken", ["runs", "rpi"])
def test_rpi_check_unreadable(runs_file, tmp_path, broken):
    rpi_path = tmp_path / "rpi.json"
    rpi_path.write_text("{not json")
    runs = tmp_path / "missing.jsonl" if broken == "runs" else runs_file
    if broken == "runs":
        rpi_path.write_text(json.dumps({"component": "c", "workload": "w", "caps": {"cpu_ns_max": 1}}))
    assert main(["rpi", "check", "--runs", str(runs), "--rpi", str(rpi_path)]) == 3


def test_missing_config_and_bad_usage(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_unknown_config_key(tmp_path):
    assert main(["run", "--config", str(write_config(tmp_path, colour="red"))]) == 1


def test_file_transport(tmp_path):
    cfg = write_config(tmp_path, transport="ring.bin")
    assert main(["optimize", "--config", str(cfg)]) == 0
    assert len(load_runs(tmp_path / "runs.jsonl")) == 6


def test_console_script_entry_point(tmp_path):
    cfg = write_config(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "tunekit.experiment.cli", "optimize", "--config", str(cfg)],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("episode ")


def test_agent_listen_mode(tmp_path):
    path = tmp_path / "ring"
    proc = subprocess.Popen(
        [sys.executable, "-m", "tunekit.experiment.cli", "agent", "--transport", str(path),
         "--duration", "1.0", "--interval", "0.5", "--timeout", "20"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    spec = ComponentSpec(3, "probe", (TunableDef("k", 1, "integer", 0, 3, default=0),), (MetricDef(1, "lat_ns", "ns"),))
    deadline = time.monotonic() + 20
    transport = None
    while transport is None:
        try:
            transport = Transport.attach(path)
        except (OSError, ValueError):
            assert time.monotonic() < deadline, "agent never created its transport"
            time.sleep(0.02)
    with Component(spec, transport) as component:
        component.register(timeout=20)
        for i in range(500):
            component.sink.record("lat_ns", float(i))
        assert component.sink.total_dropped == 0
    out, err = proc.communicate(timeout=30)
    transport.close()
    assert proc.returncode == 0, err
    lines = out.strip().splitlines()
    assert lines[0].startswith("registered component probe")
    final = json.loads(lines[-1])
    assert final["received"] == 500
    assert final["metrics"]["lat_ns"]["max"] == 499.0
