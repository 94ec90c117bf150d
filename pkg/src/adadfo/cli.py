"""Command-line interface: single runs, experiment grids, SPSA tuning."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .bench import (DEFAULT_THETA_A_GRID, DEFAULT_THETA_C_GRID, ExperimentSpec,
                    compute_metrics, run_experiment, tune_spsa)
from .corcfd import CorCfdConfig
from .fd import GainSchedule
from .linesearch import LineSearchConfig
from .optim import RunConfig, run
from .oracle import PROBLEM_NAMES, RngStream, make_problem


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise click.ClickException("config file must contain a mapping")
    return data


def _sub(data: dict, key: str, cls):
    return cls(**data[key]) if key in data else cls()


@click.group()
def main():
    """Derivative-free optimization with adaptive Cor-CFD gradients."""


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML file with RunConfig fields.")
@click.option("--problem", default=None, type=click.Choice(PROBLEM_NAMES))
@click.option("--sigma", default=None, type=float)
@click.option("--budget-pairs", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def run_cmd(config_path, problem, sigma, budget_pairs, seed, out_dir):
    """Run one algorithm once and print its metrics as JSON."""
    data = _load_config(config_path)
    if problem is not None:
        data["problem"] = problem
    if sigma is not None:
        data["sigma"] = sigma
    if budget_pairs is not None:
        data["budget_pairs"] = budget_pairs
    if seed is not None:
        data["seed"] = seed

    problem_name = data.get("problem")
    if problem_name is None:
        raise click.ClickException("a problem name is required (--problem or config)")
    prob = make_problem(problem_name, sigma=data.get("sigma", 0.0),
                        box=data.get("box"), x0=data.get("x0"))
    pairs = data.get("budget_pairs", 1000)
    gains = None
    if "gains" in data:
        gains = GainSchedule(**data["gains"])
    try:
        config = RunConfig(
            algorithm=data.get("algorithm", "adadfo_ls"),
            budget_evals=int(data.get("budget_evals", 2 * pairs)),
            n0=int(data.get("n0", 10)),
            step=data.get("step"),
            theta=float(data.get("theta", 0.7)),
            corcfd=_sub(data, "corcfd", CorCfdConfig),
            ls=_sub(data, "ls", LineSearchConfig),
            gains=gains,
            seed=int(data.get("seed", 0)),
            replication=int(data.get("replication", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise click.ClickException(str(exc))

    trajectory = run(prob, config)
    metrics = compute_metrics(prob, trajectory)
    payload = {
        "problem": problem_name,
        "algorithm": config.algorithm,
        "final_x": [float(v) for v in np.atleast_1d(trajectory.final_x)],
        "iterations": trajectory.iterations,
        "evals_used": trajectory.evals_used,
        "termination": trajectory.termination,
        "solution_error": metrics.solution_error,
        "optimality_gap": metrics.optimality_gap,
        "oscillatory_period": metrics.oscillatory_period,
        "success": metrics.success,
    }
    text = json.dumps(payload, indent=2)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "run.json").write_text(text + "\n")
    click.echo(text)


@main.command("bench")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True,
              help="YAML file with ExperimentSpec fields.")
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_dir", type=click.Path(), default="bench_out")
@click.option("--parallel", default=1, type=int,
              help="Reserved; runs are currently sequential.")
def bench_cmd(config_path, seed, out_dir, parallel):
    """Run an experiment grid and write CSV/JSON results."""
    data = _load_config(config_path)
    if seed is not None:
        data["seed"] = seed
    for key in ("sigmas", "algorithms", "budget_pairs", "box", "x0"):
        if key in data and isinstance(data[key], list):
            data[key] = tuple(data[key])
    for key, cls in (("corcfd", CorCfdConfig), ("ls", LineSearchConfig)):
        if key in data:
            data[key] = cls(**data[key])
    for key in ("kwsa_gains", "spsa_gains"):
        if key in data:
            data[key] = GainSchedule(**data[key])
    try:
        spec = ExperimentSpec(**data)
    except (TypeError, ValueError) as exc:
        raise click.ClickException(str(exc))
    aggregates = run_experiment(spec, out_dir)
    click.echo(f"wrote {len(aggregates)} aggregate cells to {out_dir}")


@main.command("tune-spsa")
@click.option("--problem", required=True, type=click.Choice(PROBLEM_NAMES))
@click.option("--sigma", default=0.1, type=float)
@click.option("--budget", "budget_per_run", default=None, type=int,
              help="Evaluations per tuning run; defaults to 2000 * dim.")
@click.option("--replications", default=20, type=int)
@click.option("--seed", default=0, type=int)
def tune_spsa_cmd(problem, sigma, budget_per_run, replications, seed):
    """Grid-search SPSA gains and print the winner."""
    prob = make_problem(problem, sigma=sigma)
    budget = budget_per_run or 2000 * prob.dim
    theta_a, theta_c = tune_spsa(
        prob, budget, RngStream(seed, "tune", problem),
        DEFAULT_THETA_A_GRID, DEFAULT_THETA_C_GRID, replications)
    click.echo(json.dumps({"theta_a": theta_a, "theta_c": theta_c}))


if __name__ == "__main__":
    sys.exit(main())
