"""Adaptive batch sizing via the norm condition.

The batch is large enough when the summed per-coordinate sample variance,
spread over the batch, is dominated by the squared gradient norm scaled by
the threshold: ``sum(var_i) / n <= theta^2 * ||g||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corcfd import GradientEstimate, round_up_to_multiple

__all__ = [
    "SamplingRule",
    "DegenerateGradientError",
    "norm_condition_holds",
    "is_degenerate",
    "required_pairs",
]

_DEGENERATE_NORM_SQ = 1e-30


class DegenerateGradientError(ValueError):
    """The gradient estimate is (numerically) zero; the norm condition
    would demand infinitely many samples."""


@dataclass(frozen=True)
class SamplingRule:
    theta: float
    K: int = 5

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError("threshold must be positive")


def is_degenerate(estimate: GradientEstimate) -> bool:
    return float(np.dot(estimate.g, estimate.g)) < _DEGENERATE_NORM_SQ


def norm_condition_holds(estimate: GradientEstimate, rule: SamplingRule) -> bool:
    """True when the noise-to-signal ratio is within the threshold.

    A degenerate (zero) gradient never satisfies the condition; callers
    should consult :func:`is_degenerate` before growing the batch.
    """
    if is_degenerate(estimate):
        return False
    g_norm_sq = float(np.dot(estimate.g, estimate.g))
    return float(np.sum(estimate.var)) / estimate.n_k <= rule.theta ** 2 * g_norm_sq


def required_pairs(estimate: GradientEstimate, rule: SamplingRule) -> int:
    """Batch size that would satisfy the norm condition, rounded up.

    Returns ``floor(sum(var_i) / (theta^2 ||g||^2)) + 1`` pushed up to the
    next multiple of ``rule.K`` and never below the current batch size.
    """
    if is_degenerate(estimate):
        raise DegenerateGradientError
    g_norm_sq = float(np.dot(estimate.g, estimate.g))
    need = int(np.floor(float(np.sum(estimate.var)) / (rule.theta ** 2 * g_norm_sq))) + 1
    return max(estimate.n_k, round_up_to_multiple(need, rule.K))
