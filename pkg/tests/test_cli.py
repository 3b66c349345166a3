import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from snldp.cli import WORKERS_ENV, RunConfig, main, run

SCHEMA = json.loads((Path(__file__).resolve().parents[1] / "docs" / "output.schema.json").read_text())

# Small but representative invocations of every subcommand.
COMMANDS = {
    "z0": ["z0"],
    "z0_cauchy": ["z0", "--density", "cauchy:0,2"],
    "tilt": ["tilt", "--sigma2", "0.1,0.01", "--n", "50"],
    "tail": ["tail", "--n", "12", "--a", "0.8", "--samples", "4000", "--method", "both"],
    "tail_fixed": ["tail", "--n", "12", "--a", "0.8", "--samples", "2000", "--event", "fixed_z"],
    "ratio": ["ratio", "--n", "16", "--samples", "4000", "--crn"],
    "ratio_naive": ["ratio", "--n", "8", "--a", "0.5", "--samples", "4000", "--method", "naive"],
    "samplesize": ["samplesize", "--p", "0.5", "--alpha", "0.05", "--u", "0.1"],
    "samplesize_search": ["samplesize", "--p", "0.5", "--alpha", "0.2", "--u", "0.5", "--samples", "2000"],
    "pfdr": ["pfdr", "--p", "0.5", "--alpha", "0.05", "--r", "4"],
    "simulate": ["simulate", "--p", "0.5", "--u", "0.5", "--m", "5000", "--n", "10", "--a", "0.5",
                 "--ratio-samples", "2000"],
    "verify": ["verify", "--suite", "tilt0"],
}


def _json(argv):
    code, text = run(argv)
    return code, json.loads(text)


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_every_command_validates_against_schema(name):
    code, doc = _json(COMMANDS[name])
    assert code == 0, doc
    jsonschema.validate(doc, SCHEMA)
    assert doc["command"] == COMMANDS[name][0]


def test_z0_values():
    _, doc = _json(["z0"])
    assert abs(doc["z0"] - 1) < 1e-8 and doc["residual"] < 1e-6
    _, doc = _json(["z0", "--density", "cauchy:0,2"])
    assert doc["z0"] == pytest.approx(2.0, rel=1e-9)


def test_pfdr_values():
    _, doc = _json(["pfdr", "--p", "0.5", "--alpha", "0.05", "--r", "19"])
    assert doc["required_ratio"] == pytest.approx(19.0)
    assert doc["pfdr_min"] == pytest.approx(0.05)


def test_samplesize_value():
    _, doc = _json(COMMANDS["samplesize"])
    assert doc["k_asymptotic"] == 30 and doc["k_search"] is None


def test_tail_reports_both_methods():
    _, doc = _json(COMMANDS["tail"])
    assert [e["method"] for e in doc["estimates"]] == ["naive", "tilted"]
    assert math.isfinite(doc["asymptotic_log_tail"])


@pytest.mark.parametrize("name", ["tilt", "tail", "ratio", "samplesize_search", "pfdr", "simulate", "verify"])
def test_csv_has_header_and_rows(name):
    code, text = run(COMMANDS[name] + ["--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert rows and "command" in rows[0] and "seed" in rows[0]
    assert all(r["command"] == COMMANDS[name][0] for r in rows)


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nope"],
        ["z0", "--density", "laplace:0,1"],
        ["z0", "--density", "gaussian:0,-1"],
        ["tail", "--n", "10"],
        ["tail", "--n", "0", "--a", "1"],
        ["ratio", "--n", "10", "--cutoff", "power:0.5"],
        ["pfdr", "--p", "0.5"],
        ["z0", "--workers", "0"],
        ["tilt", "--sigma2", "a,b"],
        ["z0", "--format", "xml"],
    ],
)
def test_usage_errors_exit_two(argv):
    code, text = run(argv)
    assert code == 2
    assert "usage" in text or "pfdr" in text


@pytest.mark.parametrize(
    "argv",
    [
        ["tail", "--n", "1", "--a", "1"],
        ["tail", "--n", "10", "--a", "-1"],
        ["pfdr", "--p", "1.5", "--alpha", "0.05"],
        ["ratio", "--n", "30", "--a", "3", "--samples", "200", "--method", "naive"],
        ["tilt", "--sigma2", "5"],
    ],
)
def test_numeric_errors_exit_one_with_error_object(argv):
    code, doc = _json(argv)
    assert code == 1
    assert set(doc["error"]) == {"type", "message"}
    jsonschema.validate(doc, SCHEMA)


def test_error_in_csv():
    code, text = run(["tail", "--n", "1", "--a", "1", "--format", "csv"])
    assert code == 1
    assert "error.message" in text.splitlines()[0]


@pytest.mark.parametrize(
    "argv",
    [
        COMMANDS["tail"],
        COMMANDS["ratio"] + ["--cutoff", "explicit:16=1.3"],
        COMMANDS["simulate"] + ["--format", "csv"],
        ["tilt", "--z", "1.5", "--sigma2", "0.1", "--density", "cauchy:0,1", "--seed", "9"],
    ],
)
def test_run_config_round_trip(argv):
    cfg = RunConfig.parse(argv)
    assert RunConfig.parse(cfg.to_argv()) == cfg


def test_workers_default_from_environment(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert RunConfig.parse(["z0"]).workers == 3
    monkeypatch.setenv(WORKERS_ENV, "junk")
    assert RunConfig.parse(["z0"]).workers == 1
    assert RunConfig.parse(["z0", "--workers", "2"]).workers == 2


@pytest.mark.parametrize("name", ["tail", "ratio", "simulate"])
def test_output_independent_of_workers(name):
    one = run(COMMANDS[name] + ["--workers", "1"])
    four = run(COMMANDS[name] + ["--workers", "4"])
    assert one == four


def test_seed_changes_monte_carlo_output():
    assert run(COMMANDS["tail"])[1] != run(COMMANDS["tail"] + ["--seed", "1"])[1]


def test_main_writes_streams(capsys):
    assert main(["pfdr", "--p", "0.5", "--alpha", "0.05"]) == 0
    out = capsys.readouterr()
    assert json.loads(out.out)["required_ratio"] == pytest.approx(19)
    assert main(["bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "snldp", "z0"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["command"] == "z0"
