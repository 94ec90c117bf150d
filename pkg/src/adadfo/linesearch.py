"""Two-phase stochastic line search.

Phase 1 backtracks while the candidate step fails the relaxed Armijo test
(the trial value is significantly above the Armijo target).  Phase 2 then
certifies the survivor: averaged evaluations at both endpoints must show a
decrease that clears the shrinking noise margin ``2 sigma_f / sqrt(N)`` for
some ``N`` up to ``N0``; otherwise the step shrinks again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import BudgetExhausted, EvaluationBudget, Problem, RngStream, evaluate

__all__ = ["LineSearchConfig", "SearchResult", "reject_step", "accept_step", "search"]


@dataclass(frozen=True)
class LineSearchConfig:
    l1: float = 1e-4
    l2: float = 0.5
    a_init: float = 1.0
    a_lb: float = 0.0
    N0: int = 10
    sigma_f: float | None = None  # None = estimate from the pilot fits
    max_shrinks: int = 60

    def __post_init__(self):
        if not 0.0 < self.l1 < self.l2 < 1.0:
            raise ValueError("need 0 < l1 < l2 < 1")
        if self.a_lb >= self.a_init:
            raise ValueError("lower step bound must be below the initial step")


@dataclass(frozen=True)
class SearchResult:
    a_k: float
    n_ls: int
    safeguard: bool = False
    exhausted: bool = False


def reject_step(f_next: float, f_curr: float, a: float, g_norm_sq: float,
                l1: float, sigma_f: float) -> bool:
    """Relaxed Armijo rejection: trial value clearly above the target."""
    return f_next > f_curr - l1 * a * g_norm_sq + 2.0 * sigma_f


def accept_step(mean_next: float, mean_curr: float, N: int, a: float,
                g_norm_sq: float, l1: float, sigma_f: float) -> bool:
    """Averaged strong-decrease certification over N evaluations per point."""
    if N < 1:
        raise ValueError("need at least one evaluation per point")
    return mean_next <= mean_curr - l1 * a * g_norm_sq - 2.0 * sigma_f / np.sqrt(N)


def search(problem: Problem, x, g: np.ndarray, config: LineSearchConfig,
           budget: EvaluationBudget, stream: RngStream,
           sigma_f: float | None = None) -> SearchResult:
    """Select a step size for the update ``x - a * g``.

    ``sigma_f`` overrides the configured noise bound (drivers pass the
    pilot-estimated value when the config leaves it unset).  All
    evaluations are fresh draws charged to the line-search budget; the
    count is returned in ``n_ls``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.asarray(g, dtype=float)
    if sigma_f is None:
        sigma_f = config.sigma_f if config.sigma_f is not None else 0.0

    g_norm_sq = float(np.dot(g, g))
    a = config.a_init
    used_before = budget.linesearch_evals
    shrinks = 0

    def _eval(point) -> float:
        return evaluate(problem, point, budget, stream, kind="linesearch")

    try:
        # Phase 1: back off while the step is rejected outright.
        while shrinks < config.max_shrinks:
            f_next = _eval(x - a * g)
            f_curr = _eval(x)
            if not reject_step(f_next, f_curr, a, g_norm_sq, config.l1, sigma_f):
                break
            a *= config.l2
            shrinks += 1
        else:
            return SearchResult(max(a, config.a_lb),
                                budget.linesearch_evals - used_before,
                                safeguard=True)

        # Phase 2: certify with growing averages, shrinking on failure.
        # Draws at x do not depend on the candidate step, so they are pooled
        # across candidates; each candidate only pays for its trial point.
        curr_samples: list[float] = []
        while a > config.a_lb:
            sum_next = 0.0
            accepted = False
            for N in range(1, config.N0 + 1):
                sum_next += _eval(x - a * g)
                if len(curr_samples) < N:
                    curr_samples.append(_eval(x))
                mean_curr = sum(curr_samples[:N]) / N
                if accept_step(sum_next / N, mean_curr, N, a, g_norm_sq,
                               config.l1, sigma_f):
                    accepted = True
                    break
            if accepted:
                break
            if shrinks >= config.max_shrinks:
                return SearchResult(max(a, config.a_lb),
                                    budget.linesearch_evals - used_before,
                                    safeguard=True)
            a *= config.l2
            shrinks += 1
    except BudgetExhausted:
        return SearchResult(max(a, config.a_lb),
                            budget.linesearch_evals - used_before,
                            exhausted=True)

    return SearchResult(max(a, config.a_lb), budget.linesearch_evals - used_before)
