"""Experiment harness: metrics, SPSA tuning, macroreplications, result files.

Budgets in experiment specs are expressed in sample pairs (one pair = two
function evaluations); the 64-dimensional problem's checkpoints are scaled
by the dimension, matching how its results are tabulated.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corcfd import CorCfdConfig
from .fd import GainSchedule
from .linesearch import LineSearchConfig
from .optim import RunConfig, Trajectory, run
from .oracle import Problem, RngStream, evaluate_true, make_problem

__all__ = [
    "Metrics",
    "ConvergenceProbe",
    "ExperimentSpec",
    "oscillatory_period",
    "compute_metrics",
    "tune_spsa",
    "run_experiment",
    "convergence_probe",
    "nearest_rank_quantile",
    "DEFAULT_THETA_A_GRID",
    "DEFAULT_THETA_C_GRID",
]

DEFAULT_THETA_A_GRID = tuple(10.0 ** e for e in range(-9, 3))
DEFAULT_THETA_C_GRID = tuple(10.0 ** e for e in range(-4, 3))

CSV_COLUMNS = [
    "problem", "sigma", "algorithm", "replication", "budget_pairs",
    "solution_error", "optimality_gap", "oscillatory_period", "success",
    "evals_used", "wall_ms",
]


@dataclass(frozen=True)
class Metrics:
    solution_error: float
    optimality_gap: float
    oscillatory_period: int
    success: bool


@dataclass(frozen=True)
class ConvergenceProbe:
    """Setting for the synthetic controlled-error contraction check."""

    m: float = 1.0
    M: float = 1.0
    theta: float = 0.2
    a: float | None = None
    replications: int = 1000

    def step_size(self) -> float:
        if self.a is not None:
            return self.a
        return 1.0 / ((2.0 * self.theta ** 2 + 2.0 * self.theta + 1.0) * self.M)

    def contraction(self) -> float:
        return 1.0 - (self.m - 2.0 * self.theta * self.M) * self.step_size()


def oscillatory_period(trajectory: Trajectory, problem: Problem) -> int:
    """Count consecutive distinct boundary iterates.

    Cardinality of ``{k >= 2 : x_{k-1}, x_k on the boundary, x_k != x_{k-1}}``
    over the recorded iterate sequence.  Unbounded problems return 0 by
    convention, as do trajectories without recorded iterates.
    """
    if not problem.bounded or trajectory.xs is None:
        return 0
    xs = trajectory.xs
    on_boundary = np.any((xs == problem.lower) | (xs == problem.upper), axis=1)
    moved = np.any(xs[1:] != xs[:-1], axis=1)
    return int(np.count_nonzero(on_boundary[1:] & on_boundary[:-1] & moved))


def compute_metrics(problem: Problem, trajectory: Trajectory) -> Metrics:
    """Solution error, optimality gap, oscillation count, and success flag."""
    err = float(np.linalg.norm(trajectory.final_x - problem.x_star))
    gap = evaluate_true(problem, trajectory.final_x) - evaluate_true(problem, problem.x_star)
    initial_gap = evaluate_true(problem, problem.x0) - evaluate_true(problem, problem.x_star)
    return Metrics(
        solution_error=err,
        optimality_gap=gap,
        oscillatory_period=oscillatory_period(trajectory, problem),
        success=bool(gap < initial_gap),
    )


def tune_spsa(problem: Problem, budget_per_run: int, stream: RngStream,
              theta_a_grid=DEFAULT_THETA_A_GRID,
              theta_c_grid=DEFAULT_THETA_C_GRID,
              replications: int = 20) -> tuple[float, float]:
    """Grid-search SPSA gains by minimal average optimality gap.

    Each cell runs ``replications`` macroreplications of ``budget_per_run``
    evaluations.  Ties break toward smaller theta_a, then smaller theta_c.
    If every cell produces non-finite gaps, the cell with the fewest
    non-finite outcomes wins.
    """
    if not theta_a_grid or not theta_c_grid:
        raise ValueError("tuning grid must be nonempty")
    best = None  # (avg_gap, bad_count, theta_a, theta_c)
    for ia, theta_a in enumerate(theta_a_grid):
        for ic, theta_c in enumerate(theta_c_grid):
            gains = GainSchedule(theta_a, theta_c, form="spsa")
            # fold the cell index into the replication key so grid cells
            # never share random draws
            cell = ia * len(theta_c_grid) + ic
            gaps = []
            for rep in range(replications):
                config = RunConfig(
                    algorithm="spsa", budget_evals=budget_per_run, gains=gains,
                    seed=stream.seed, replication=cell * 100_003 + rep,
                    record_iterates=False,
                )
                traj = run(problem, config)
                gaps.append(compute_metrics(problem, traj).optimality_gap)
            gaps = np.asarray(gaps)
            finite = gaps[np.isfinite(gaps)]
            bad = int(gaps.size - finite.size)
            avg = float(finite.mean()) if finite.size else math.inf
            candidate = (avg, bad, theta_a, theta_c)
            if best is None or (candidate[0], candidate[1]) < (best[0], best[1]):
                best = candidate
    return best[2], best[3]


@dataclass(frozen=True)
class ExperimentSpec:
    """A (problem x algorithm x budget x replication) grid with outputs."""

    problem: str
    sigmas: tuple = (0.1,)
    algorithms: tuple = ("adadfo_ls",)
    budget_pairs: tuple = (100, 1000, 10000)
    replications: int = 10
    seed: int = 0
    theta: float = 0.7
    n0: int = 10
    step: float | None = None
    corcfd: CorCfdConfig = field(default_factory=CorCfdConfig)
    ls: LineSearchConfig = field(default_factory=LineSearchConfig)
    kwsa_gains: GainSchedule = GainSchedule(1.0, 1.0, form="kwsa")
    spsa_gains: GainSchedule | None = None
    spsa_tuning_budget: int | None = None
    scale_pairs_by_dim: bool = True
    box: tuple | None = None
    x0: tuple | None = None

    def __post_init__(self):
        if list(self.budget_pairs) != sorted(self.budget_pairs):
            raise ValueError("budget checkpoints must be ascending")
        if self.replications < 1:
            raise ValueError("need at least one replication")


def _make_run_config(spec: ExperimentSpec, algorithm: str, budget_evals: int,
                     rep: int, spsa_gains: GainSchedule | None) -> RunConfig:
    common = dict(budget_evals=budget_evals, seed=spec.seed, replication=rep)
    if algorithm == "adadfo_ls":
        return RunConfig(algorithm=algorithm, n0=spec.n0, theta=spec.theta,
                         corcfd=spec.corcfd, ls=spec.ls, **common)
    if algorithm == "adadfo_const":
        return RunConfig(algorithm=algorithm, n0=spec.n0, theta=spec.theta,
                         corcfd=spec.corcfd, step=spec.step, **common)
    if algorithm == "kwsa":
        return RunConfig(algorithm=algorithm, gains=spec.kwsa_gains, **common)
    if algorithm == "spsa":
        return RunConfig(algorithm=algorithm, gains=spsa_gains, **common)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def nearest_rank_quantile(values, q: float) -> float:
    """Nearest-rank quantile: the ceil(q * n)-th smallest value."""
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        return math.nan
    rank = max(int(math.ceil(q * ordered.size)), 1)
    return float(ordered[rank - 1])


def run_experiment(spec: ExperimentSpec, out_dir) -> dict:
    """Run the full grid; write per-replication CSV and aggregate JSON.

    Returns the aggregate dictionary, keyed by
    ``problem|sigma|algorithm|budget_pairs``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []

    for sigma in spec.sigmas:
        problem = make_problem(spec.problem, sigma=sigma, box=spec.box, x0=spec.x0)
        dim_scale = problem.dim if spec.scale_pairs_by_dim else 1
        spsa_gains = spec.spsa_gains
        if "spsa" in spec.algorithms and spsa_gains is None:
            tuning_budget = spec.spsa_tuning_budget or 2000 * problem.dim
            theta_a, theta_c = tune_spsa(
                problem, tuning_budget, RngStream(spec.seed, "tune", spec.problem))
            spsa_gains = GainSchedule(theta_a, theta_c, form="spsa")
        for algorithm in spec.algorithms:
            for pairs in spec.budget_pairs:
                budget_evals = 2 * pairs * dim_scale
                for rep in range(spec.replications):
                    config = _make_run_config(spec, algorithm, budget_evals,
                                              rep, spsa_gains)
                    start = time.perf_counter()
                    try:
                        traj = run(problem, config)
                        metrics = compute_metrics(problem, traj)
                        evals = traj.evals_used
                    except Exception:  # record the failure, keep going
                        metrics = Metrics(math.nan, math.nan, 0, False)
                        evals = 0
                    wall_ms = 1000.0 * (time.perf_counter() - start)
                    rows.append({
                        "problem": spec.problem, "sigma": sigma,
                        "algorithm": algorithm, "replication": rep,
                        "budget_pairs": pairs,
                        "solution_error": metrics.solution_error,
                        "optimality_gap": metrics.optimality_gap,
                        "oscillatory_period": metrics.oscillatory_period,
                        "success": metrics.success,
                        "evals_used": evals, "wall_ms": wall_ms,
                    })

    csv_path = out_dir / "replications.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    aggregates = {}
    keys = sorted({(r["problem"], r["sigma"], r["algorithm"], r["budget_pairs"])
                   for r in rows})
    for key in keys:
        group = [r for r in rows
                 if (r["problem"], r["sigma"], r["algorithm"], r["budget_pairs"]) == key]
        agg = {}
        for metric in ("solution_error", "optimality_gap", "oscillatory_period"):
            values = [r[metric] for r in group]
            agg[metric] = {
                "mean": float(np.mean(values)),
                "median": nearest_rank_quantile(values, 0.5),
                "q05": nearest_rank_quantile(values, 0.05),
                "q95": nearest_rank_quantile(values, 0.95),
            }
        agg["success_rate"] = float(np.mean([r["success"] for r in group]))
        aggregates["|".join(str(p) for p in key)] = agg

    with open(out_dir / "aggregates.json", "w") as fh:
        json.dump(aggregates, fh, indent=2, sort_keys=True)
    return aggregates


def convergence_probe(probe: ConvergenceProbe, steps: int, x0, seed: int = 0) -> dict:
    """Controlled-error contraction check on the scaled quadratic bowl.

    The gradient of ``(m/2)||x||^2``-style bowls is fed to the recursion with
    zero bias and injected Gaussian noise scaled so its expected squared norm
    equals ``theta^2 ||grad||^2``; replications are vectorized.  Returns the
    empirical mean of ``||x_k - x*||^2`` per step alongside the theoretical
    envelope.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size
    a = probe.step_size()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(97,)))
    x = np.tile(x0, (probe.replications, 1))
    mean_sq = [float(np.mean(np.sum(x * x, axis=1)))]
    for _ in range(steps):
        grad = probe.m * x  # bowl with Hessian m*I (m = M here)
        noise = rng.standard_normal((probe.replications, d))
        scale = probe.theta * np.linalg.norm(grad, axis=1, keepdims=True) / np.sqrt(d)
        x = x - a * (grad + scale * noise)
        mean_sq.append(float(np.mean(np.sum(x * x, axis=1))))
    bound = [probe.contraction() ** k * float(np.dot(x0, x0))
             for k in range(steps + 1)]
    return {"mean_sq_error": mean_sq, "bound": bound}
