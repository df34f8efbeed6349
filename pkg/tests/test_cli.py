import json
import re
import subprocess
import sys

import pytest

from vmmix.cli import build_parser, run


@pytest.fixture(scope="module")
def trace_path(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "t.csv"
    assert run(["synth", "--years", "0.25", "--jobs-per-hour", "3", "--seed", "7", "--out", str(p)]) == 0
    return p


def _out(capsys):
    return capsys.readouterr().out


def test_offline_without_transient(trace_path, tmp_path):
    out = tmp_path / "r.json"
    code = run(["offline", "--trace", str(trace_path), "--provider", "aws", "--no-option", "transient",
                "--out", str(out)])
    assert code == 0
    d = json.loads(out.read_text())
    assert d["provider"] == "aws"
    assert "transient" not in d["options"]
    assert sum(d["mix_fractions"].values()) == pytest.approx(1.0)


def test_synth_then_simulate_deterministic(tmp_path, capsys):
    t = tmp_path / "t.csv"
    assert run(["synth", "--years", "0.2", "--jobs-per-hour", "3", "--seed", "7", "--out", str(t)]) == 0
    first = t.read_bytes()
    assert run(["synth", "--years", "0.2", "--jobs-per-hour", "3", "--seed", "7", "--out", str(t)]) == 0
    assert t.read_bytes() == first
    capsys.readouterr()
    assert run(["simulate", "--trace", str(t), "--provider", "gcp-standard", "--seed", "7"]) == 0
    a = _out(capsys)
    assert run(["simulate", "--trace", str(t), "--provider", "gcp-standard", "--seed", "7"]) == 0
    assert _out(capsys) == a
    assert json.loads(a)["source"] == "online"


def test_missing_trace_is_data_error(tmp_path, capsys):
    assert run(["offline", "--trace", str(tmp_path / "missing.csv"), "--provider", "aws"]) == 2
    assert "missing.csv" in capsys.readouterr().err


def test_unknown_provider_is_data_error(trace_path):
    assert run(["offline", "--trace", str(trace_path), "--provider", "oracle-cloud"]) == 2


def test_malformed_config_is_data_error(trace_path, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{\"on_demand\": ")
    assert run(["offline", "--trace", str(trace_path), "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"simulation": {"nonsense": 1}}))
    assert run(["simulate", "--trace", str(trace_path), "--config", str(cfg)]) == 2


def test_malformed_trace_is_data_error(tmp_path):
    t = tmp_path / "bad.csv"
    t.write_text("job_id,submit_time\n1,2\n")
    assert run(["offline", "--trace", str(t)]) == 2


def test_usage_errors(trace_path, capsys):
    assert run([]) == 1
    assert run(["offline"]) == 1
    assert run(["offline", "--trace", str(trace_path), "--mode", "dense"]) == 1
    assert run(["offline", "--trace", str(trace_path), "--no-option", "teleport"]) == 1
    assert run(["offline", "--trace", str(trace_path), "--provider", "aws", "--provider", "azure",
                "--format", "csv"]) == 1
    assert "usage" in capsys.readouterr().err


def test_config_overrides_prices(trace_path, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"base_dollar_rate": 1.0, "revocation": {"kind": "none", "param": 0}}))
    assert run(["baseline", "--trace", str(trace_path), "--config", str(cfg)]) == 0
    d = json.loads(_out(capsys))
    assert d["on_demand_dollars"] == pytest.approx(d["on_demand"])
    assert d["reserved_peak"] > d["on_demand"]


def test_report_reformat(trace_path, tmp_path, capsys):
    r = tmp_path / "r.json"
    assert run(["offline", "--trace", str(trace_path), "--out", str(r)]) == 0
    assert run(["report", "--in", str(r), "--format", "csv"]) == 0
    lines = _out(capsys).strip().splitlines()
    assert lines[0] == "option,resource_hours,relative_cost,dollar_cost,mix_fraction"
    assert lines[-1].startswith("total,")
    assert run(["report", "--in", str(r)]) == 0
    assert _out(capsys) == r.read_text()


def test_series_output(trace_path, tmp_path):
    s = tmp_path / "s.csv"
    assert run(["offline", "--trace", str(trace_path), "--series", str(s), "--out", str(tmp_path / "r")]) == 0
    assert s.read_text().startswith("slot_start,demand,")


def test_workers_do_not_change_output(trace_path, capsys):
    argv = ["offline", "--trace", str(trace_path), "--provider", "aws", "--provider", "gcp-standard",
            "--provider", "gcp-custom"]
    assert run(argv) == 0
    a = _out(capsys)
    assert run(argv + ["--workers", "3"]) == 0
    assert _out(capsys) == a
    assert [d["provider"] for d in json.loads(a)] == ["aws", "gcp-standard", "gcp-custom"]


def test_help_documents_every_flag(capsys):
    assert run(["--help"]) == 0
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name, p in sub.choices.items():
        assert run([name, "--help"]) == 0
        text = capsys.readouterr().out
        for action in p._actions:
            for flag in action.option_strings:
                assert re.search(re.escape(flag) + r"\b", text), (name, flag)
            if action.option_strings and action.dest != "help":
                assert action.help, (name, action.dest)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "vmmix", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "offline" in res.stdout
