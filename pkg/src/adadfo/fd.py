"""Central finite differences and the KWSA/SPSA baseline gradient surrogates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import EvaluationBudget, Problem, RngStream, evaluate_batch

__all__ = [
    "CfdResult",
    "GainSchedule",
    "cfd_batch",
    "kwsa_gains",
    "spsa_gains",
    "spsa_gradient",
]


@dataclass(frozen=True)
class CfdResult:
    """Mean central-difference quotient over a batch of pairs.

    ``sample_variance`` is the unbiased variance of the quotients; it is
    ``None`` when fewer than two pairs were evaluated.  ``pairs`` flags
    partial batches cut short by the budget.
    """

    estimate: float
    sample_variance: float | None
    pairs: int


def cfd_batch(problem: Problem, x, direction_index: int, h: float, n: int,
              budget: EvaluationBudget, stream: RngStream) -> CfdResult:
    """Average of ``n`` central-difference quotients along one coordinate.

    Consumes two evaluations per pair.  If the budget cannot afford all
    ``n`` pairs, only the affordable prefix is evaluated.
    """
    if h <= 0.0:
        raise ValueError("perturbation must be positive")
    if n < 1:
        raise ValueError("need at least one pair")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pairs = min(n, budget.remaining // 2)
    if pairs == 0:
        return CfdResult(np.nan, None, 0)
    direction = np.zeros(problem.dim)
    direction[direction_index] = h
    points = np.empty((2 * pairs, problem.dim))
    points[0::2] = x + direction
    points[1::2] = x - direction
    values = evaluate_batch(problem, points, budget, stream)
    quotients = (values[0::2] - values[1::2]) / (2.0 * h)
    variance = float(np.var(quotients, ddof=1)) if pairs >= 2 else None
    return CfdResult(float(np.mean(quotients)), variance, pairs)


@dataclass(frozen=True)
class GainSchedule:
    """Diminishing gain sequences for the KWSA and SPSA baselines."""

    theta_a: float
    theta_c: float
    form: str = "kwsa"

    def __post_init__(self):
        if self.form not in ("kwsa", "spsa"):
            raise ValueError(f"unknown gain form {self.form!r}")


# Stability constant in the SPSA step-size denominator; fixed by the tuning
# protocol, deliberately not configurable.
SPSA_STABILITY = 50.0
SPSA_STEP_EXPONENT = 0.602
SPSA_PERTURB_EXPONENT = 0.101


def kwsa_gains(schedule: GainSchedule, k: int) -> tuple[float, float]:
    """Step size and perturbation (a_k, h_k) at iteration k >= 1."""
    if k < 1:
        raise ValueError("iteration index must be >= 1")
    return schedule.theta_a / k, schedule.theta_c / k ** 0.25


def spsa_gains(schedule: GainSchedule, k: int) -> tuple[float, float]:
    """Step size and perturbation (a_k, c_k) at iteration k >= 1."""
    if k < 1:
        raise ValueError("iteration index must be >= 1")
    a_k = schedule.theta_a / (k + SPSA_STABILITY) ** SPSA_STEP_EXPONENT
    c_k = schedule.theta_c / k ** SPSA_PERTURB_EXPONENT
    return a_k, c_k


def spsa_gradient(problem: Problem, x, schedule: GainSchedule, k: int,
                  budget: EvaluationBudget, stream: RngStream,
                  delta: np.ndarray | None = None) -> np.ndarray:
    """Simultaneous-perturbation gradient surrogate; two evaluations total.

    ``delta`` lets callers supply the Rademacher sign vector (used by tests
    that enumerate all sign patterns); by default it is drawn from ``stream``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _, c_k = spsa_gains(schedule, k)
    if delta is None:
        delta = stream.rademacher(problem.dim).astype(float)
    else:
        delta = np.asarray(delta, dtype=float)
    points = np.vstack([x + c_k * delta, x - c_k * delta])
    values = evaluate_batch(problem, points, budget, stream)
    return (values[0] - values[1]) / (2.0 * c_k * delta)
