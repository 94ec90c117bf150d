"""Command-line interface."""

import json

import pytest
import yaml
from click.testing import CliRunner

from adadfo.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def test_run_command_prints_metrics(runner):
    result = runner.invoke(main, ["run", "--problem", "power4", "--sigma", "0.1",
                                  "--budget-pairs", "30", "--seed", "1"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["problem"] == "power4"
    assert payload["algorithm"] == "adadfo_ls"
    assert payload["evals_used"] <= 60
    assert {"solution_error", "optimality_gap", "success"} <= payload.keys()


def test_run_command_writes_json(runner, tmp_path):
    out = tmp_path / "artifacts"
    result = runner.invoke(main, ["run", "--problem", "power4", "--sigma", "0",
                                  "--budget-pairs", "20", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads((out / "run.json").read_text())["problem"] == "power4"


def test_run_command_config_file(runner, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({
        "problem": "power4", "sigma": 1.0, "algorithm": "kwsa",
        "budget_pairs": 50, "gains": {"theta_a": 1.0, "theta_c": 1.0,
                                      "form": "kwsa"},
    }))
    result = runner.invoke(main, ["run", "--config", str(cfg), "--seed", "2"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["algorithm"] == "kwsa"


def test_run_command_requires_problem(runner):
    result = runner.invoke(main, ["run"])
    assert result.exit_code != 0


def test_run_command_rejects_bad_algorithm(runner, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"problem": "power4", "algorithm": "newton"}))
    result = runner.invoke(main, ["run", "--config", str(cfg)])
    assert result.exit_code != 0


def test_bench_command(runner, tmp_path):
    cfg = tmp_path / "bench.yaml"
    cfg.write_text(yaml.safe_dump({
        "problem": "power4", "sigmas": [0.1], "algorithms": ["kwsa"],
        "budget_pairs": [20, 40], "replications": 2,
    }))
    out = tmp_path / "results"
    result = runner.invoke(main, ["bench", "--config", str(cfg), "--seed", "4",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "replications.csv").exists()
    assert (out / "aggregates.json").exists()


def test_bench_command_rejects_bad_spec(runner, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"problem": "power4",
                                   "budget_pairs": [100, 10]}))
    result = runner.invoke(main, ["bench", "--config", str(cfg)])
    assert result.exit_code != 0


def test_tune_spsa_command(runner):
    result = runner.invoke(main, ["tune-spsa", "--problem", "power4",
                                  "--sigma", "0.1", "--budget", "20",
                                  "--replications", "1"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["theta_a"] > 0 and payload["theta_c"] > 0
