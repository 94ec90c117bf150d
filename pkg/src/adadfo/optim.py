"""Optimization drivers with a shared budget and trajectory discipline.

Two adaptive drivers (constant step and stochastic line search) built on the
correlation-induced gradient estimator, plus the KWSA and SPSA baselines.
The baselines route through compiled trajectory kernels for the built-in
analytic problems and fall back to the generic oracle path otherwise; both
paths draw the same noise in the same order, so they are interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corcfd import (CorCfdConfig, GradientEstimate, augment_gradient,
                     cor_cfd_gradient, round_up_to_multiple)
from .fd import GainSchedule, kwsa_gains, spsa_gains
from .linesearch import LineSearchConfig, search
from .oracle import (BudgetExhausted, EvaluationBudget, Problem, RngStream,
                     evaluate, evaluate_batch, project)
from .sampling import SamplingRule, is_degenerate, norm_condition_holds, required_pairs

__all__ = [
    "RunConfig",
    "IterationRecord",
    "Trajectory",
    "run",
    "run_adadfo_const",
    "run_adadfo_ls",
    "run_kwsa",
    "run_spsa",
]

ALGORITHMS = ("adadfo_const", "adadfo_ls", "kwsa", "spsa")


@dataclass(frozen=True)
class RunConfig:
    """Everything one algorithm run depends on, seed included."""

    algorithm: str
    budget_evals: int
    n0: int = 10
    step: float | None = None
    theta: float = 0.7
    corcfd: CorCfdConfig = field(default_factory=CorCfdConfig)
    ls: LineSearchConfig = field(default_factory=LineSearchConfig)
    gains: GainSchedule | None = None
    seed: int = 0
    replication: int = 0
    max_pairs_per_iteration: int = 10_000
    record_iterates: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "adadfo_const" and self.step is None:
            raise ValueError("constant-step mode needs a step size")
        if self.algorithm in ("kwsa", "spsa") and self.gains is None:
            raise ValueError("baselines need a gain schedule")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    x: np.ndarray
    a: float
    n_k: int
    n_ls: int
    s: int


@dataclass
class Trajectory:
    final_x: np.ndarray
    iterations: int
    evals_used: int
    termination: str
    budget: EvaluationBudget
    xs: np.ndarray | None = None
    records: list = field(default_factory=list)


def _run_stream(config: RunConfig) -> RngStream:
    return RngStream(config.seed, "run", config.algorithm, config.replication)


def run(problem: Problem, config: RunConfig) -> Trajectory:
    """Dispatch on ``config.algorithm``."""
    return {
        "adadfo_const": run_adadfo_const,
        "adadfo_ls": run_adadfo_ls,
        "kwsa": run_kwsa,
        "spsa": run_spsa,
    }[config.algorithm](problem, config)


def _run_adadfo(problem: Problem, config: RunConfig, line_search: bool) -> Trajectory:
    budget = EvaluationBudget(config.budget_evals)
    stream = _run_stream(config)
    rule = SamplingRule(config.theta, config.corcfd.K)
    cap = round_up_to_multiple(config.max_pairs_per_iteration, config.corcfd.K)

    x = np.array(problem.x0, dtype=float)
    xs = [x.copy()] if config.record_iterates else None
    records: list[IterationRecord] = []
    n_k = round_up_to_multiple(max(config.n0, 2 * config.corcfd.K), config.corcfd.K)
    k = 0
    termination = "budget"

    while not budget.exhausted:
        estimate = cor_cfd_gradient(problem, x, n_k, config.corcfd, budget,
                                    stream.child("grad", k))
        if estimate.partial:
            termination = "budget_mid_gradient"
            break
        if not np.all(np.isfinite(estimate.g)):
            termination = "non_finite_gradient"
            break
        n_k = estimate.n_k

        if not norm_condition_holds(estimate, rule):
            if is_degenerate(estimate):
                target = cap
            else:
                target = min(required_pairs(estimate, rule), cap)
            if target > n_k:
                estimate = augment_gradient(estimate, target, problem, x,
                                            config.corcfd, budget,
                                            stream.child("augment", k))
                if estimate.partial:
                    termination = "budget_mid_gradient"
                    break
                n_k = target

        if line_search:
            if config.ls.sigma_f is not None:
                sigma_f = config.ls.sigma_f
            else:
                sigma_f = float(np.sqrt(np.mean([f.sigma2_hat for f in estimate.fits])))
            result = search(problem, x, estimate.g, config.ls, budget,
                            stream.child("ls", k), sigma_f=sigma_f)
            if result.exhausted:
                # the budget died before the step was certified; committing
                # the uncertified step could move anywhere
                termination = "budget_mid_linesearch"
                break
            a_k, n_ls = result.a_k, result.n_ls
        else:
            a_k, n_ls = float(config.step), 0

        x_new = project(problem, x - a_k * estimate.g)
        if not np.all(np.isfinite(x_new)):
            termination = "diverged"
            break
        x = x_new
        k += 1
        if xs is not None:
            xs.append(x.copy())
        records.append(IterationRecord(k, x.copy(), a_k, n_k, n_ls, budget.used))

    return Trajectory(
        final_x=x, iterations=k, evals_used=budget.used, termination=termination,
        budget=budget, xs=np.array(xs) if xs is not None else None, records=records,
    )


def run_adadfo_const(problem: Problem, config: RunConfig) -> Trajectory:
    """Adaptive-batch Cor-CFD descent with a constant step size."""
    if config.step is None or config.step <= 0.0:
        raise ValueError("constant-step mode needs a positive step size")
    return _run_adadfo(problem, config, line_search=False)


def run_adadfo_ls(problem: Problem, config: RunConfig) -> Trajectory:
    """Adaptive-batch Cor-CFD descent with the two-phase stochastic line search."""
    return _run_adadfo(problem, config, line_search=True)


def _kernel_eligible(problem: Problem) -> bool:
    return problem.kernel_code is not None and problem.constant_sigma is not None


def run_kwsa(problem: Problem, config: RunConfig) -> Trajectory:
    """Kiefer-Wolfowitz recursion: one central-difference pair per iteration."""
    if problem.dim != 1:
        raise ValueError("the KWSA baseline is one-dimensional")
    schedule = config.gains
    if schedule.form != "kwsa":
        raise ValueError("KWSA needs a kwsa-form gain schedule")
    budget = EvaluationBudget(config.budget_evals)
    stream = _run_stream(config)
    noise = stream.child("noise")
    iters = config.budget_evals // 2

    if _kernel_eligible(problem):
        sigma = problem.constant_sigma
        normals = (noise.standard_normal((iters, 2)) if sigma > 0.0
                   else np.zeros((iters, 2)))
        xs, committed, attempted = kernels.kwsa_trajectory(
            problem.kernel_code, float(problem.x0[0]),
            float(problem.lower[0]), float(problem.upper[0]),
            schedule.theta_a, schedule.theta_c, sigma, iters, normals)
        budget.charge(2 * attempted)
        return Trajectory(
            final_x=np.array([xs[-1]]), iterations=committed,
            evals_used=budget.used,
            termination="diverged" if attempted > committed else "budget",
            budget=budget,
            xs=xs[:, None] if config.record_iterates else None,
        )

    x = np.array(problem.x0, dtype=float)
    xs = [x.copy()]
    k = 0
    termination = "budget"
    while budget.remaining >= 2:
        k += 1
        a_k, h_k = kwsa_gains(schedule, k)
        fp = evaluate(problem, x + h_k, budget, noise)
        fm = evaluate(problem, x - h_k, budget, noise)
        x_new = project(problem, x - a_k * (fp - fm) / (2.0 * h_k))
        if not np.all(np.isfinite(x_new)):
            k -= 1
            termination = "diverged"
            break
        x = x_new
        xs.append(x.copy())
    return Trajectory(
        final_x=x, iterations=k, evals_used=budget.used, termination=termination,
        budget=budget, xs=np.array(xs) if config.record_iterates else None,
    )


def run_spsa(problem: Problem, config: RunConfig) -> Trajectory:
    """SPSA recursion: two evaluations along a random sign vector per iteration."""
    schedule = config.gains
    if schedule.form != "spsa":
        raise ValueError("SPSA needs a spsa-form gain schedule")
    budget = EvaluationBudget(config.budget_evals)
    stream = _run_stream(config)
    delta_stream = stream.child("delta")
    noise = stream.child("noise")
    iters = config.budget_evals // 2
    d = problem.dim

    if _kernel_eligible(problem):
        sigma = problem.constant_sigma
        deltas = (2 * delta_stream.integers(0, 2, (iters, d)) - 1).astype(float)
        normals = (noise.standard_normal((iters, 2)) if sigma > 0.0
                   else np.zeros((iters, 2)))
        out, committed, attempted = kernels.spsa_trajectory(
            problem.kernel_code, np.array(problem.x0, dtype=float),
            problem.lower, problem.upper,
            schedule.theta_a, schedule.theta_c, sigma, iters, normals,
            deltas, bool(config.record_iterates))
        budget.charge(2 * attempted)
        if config.record_iterates:
            xs, final_x = out, out[-1].copy()
        else:
            xs, final_x = None, out
        return Trajectory(
            final_x=final_x, iterations=committed, evals_used=budget.used,
            termination="diverged" if attempted > committed else "budget",
            budget=budget, xs=xs,
        )

    x = np.array(problem.x0, dtype=float)
    xs = [x.copy()]
    k = 0
    termination = "budget"
    while budget.remaining >= 2:
        k += 1
        a_k, c_k = spsa_gains(schedule, k)
        delta = (2 * delta_stream.integers(0, 2, d) - 1).astype(float)
        points = np.vstack([x + c_k * delta, x - c_k * delta])
        values = evaluate_batch(problem, points, budget, noise)
        # associate exactly as the compiled kernel does: (a_k * diff) / delta
        with np.errstate(over="ignore", invalid="ignore"):
            diff = (values[0] - values[1]) / (2.0 * c_k)
            x_new = project(problem, x - a_k * diff / delta)
        if not np.all(np.isfinite(x_new)):
            k -= 1
            termination = "diverged"
            break
        x = x_new
        xs.append(x.copy())
    return Trajectory(
        final_x=x, iterations=k, evals_used=budget.used, termination=termination,
        budget=budget, xs=np.array(xs) if config.record_iterates else None,
    )
