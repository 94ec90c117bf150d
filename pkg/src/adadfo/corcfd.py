"""Correlation-induced central finite differences.

The estimator spends a whole batch twice: once to learn the bias/variance
structure of the difference quotients (pilot perturbations, bootstrap
moments, two small regressions, plug-in optimal perturbation) and once more
by re-transforming every quotient to the estimated optimal perturbation and
averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .oracle import EvaluationBudget, Problem, RngStream, evaluate_batch

__all__ = [
    "CorCfdConfig",
    "PilotDesign",
    "PilotFit",
    "CoordinateEstimate",
    "GradientEstimate",
    "generate_perturbations",
    "bootstrap_moments",
    "fit_pilot",
    "transform_sample",
    "cor_cfd_coordinate",
    "cor_cfd_gradient",
    "augment_gradient",
    "round_up_to_multiple",
]

_DISTINCT_RTOL = 1e-12


@dataclass(frozen=True)
class CorCfdConfig:
    """Pilot-design and bootstrap settings.

    The perturbation generator is a truncated normal with mean ``gen_mean``,
    standard deviation ``gen_std_scale * n^(-1/5)`` and support
    ``[trunc_lo_scale * n^(-1/5), inf)``, where ``n`` is the batch size.
    ``h_cap`` bounds the plug-in perturbation at ``h_cap`` times the largest
    pilot perturbation.
    """

    K: int = 5
    I: int = 100
    gen_mean: float = 0.0
    gen_std_scale: float = 1.0
    trunc_lo_scale: float = 0.1
    h_cap: float = 10.0

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("need at least two pilot perturbations")
        if self.I < 2:
            raise ValueError("need at least two bootstrap replications")
        if self.gen_std_scale <= 0.0 or self.trunc_lo_scale <= 0.0:
            raise ValueError("generator scales must be positive")


@dataclass
class PilotDesign:
    """Raw difference quotients grouped by pilot perturbation.

    ``counts[k]`` pairs were drawn at ``h[k]``; ``quotients[k]`` holds their
    central-difference quotients.  Counts may become unequal after an
    augmentation that does not divide evenly.
    """

    h: np.ndarray
    counts: np.ndarray
    quotients: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(np.sum(self.counts))


@dataclass(frozen=True)
class PilotFit:
    """Outputs of the pilot regressions for one coordinate."""

    g_hat: float
    B_hat: float
    sigma2_hat: float
    h_opt: float
    clamped: bool = False


@dataclass
class CoordinateEstimate:
    estimate: float
    sample_variance: float
    fit: PilotFit
    design: PilotDesign
    pairs: int
    partial: bool = False


@dataclass
class GradientEstimate:
    """Cor-CFD gradient with per-coordinate sample variances."""

    g: np.ndarray
    var: np.ndarray
    n_k: int
    coordinates: list

    @property
    def fits(self) -> list:
        return [c.fit for c in self.coordinates]

    @property
    def partial(self) -> bool:
        return any(c.partial for c in self.coordinates)

    @property
    def pairs_total(self) -> int:
        return sum(c.pairs for c in self.coordinates)


def round_up_to_multiple(n: int, k: int) -> int:
    return ((n + k - 1) // k) * k


def generate_perturbations(config: CorCfdConfig, K: int, n_k: int,
                           stream: RngStream) -> np.ndarray:
    """Draw K distinct positive perturbations from the truncated normal.

    Sampling is by inverse CDF so the draws are a pure function of the
    stream's uniforms.  Collisions within relative tolerance 1e-12 are
    resampled.
    """
    if K < 2:
        raise ValueError("need at least two perturbations")
    if n_k < 1:
        raise ValueError("batch size must be positive")
    scale_n = n_k ** (-1.0 / 5.0)
    std = config.gen_std_scale * scale_n
    lo = config.trunc_lo_scale * scale_n
    cdf_lo = ndtr((lo - config.gen_mean) / std)
    if cdf_lo >= 1.0:
        raise ValueError("truncated region has no mass; check generator scales")

    draws: list[float] = []
    attempts = 0
    while len(draws) < K:
        u = float(stream.uniform())
        h = abs(config.gen_mean + std * ndtri(cdf_lo + u * (1.0 - cdf_lo)))
        if all(abs(h - prev) > _DISTINCT_RTOL * max(h, prev) for prev in draws):
            draws.append(h)
        attempts += 1
        if attempts > 1000 * K:
            raise RuntimeError("could not draw distinct perturbations")
    return np.array(draws)


def bootstrap_moments(design: PilotDesign, k_index: int, I: int,
                      stream: RngStream) -> tuple[float, float]:
    """Bootstrap mean and variance of the batch-mean quotient at one h.

    Resamples the quotients at ``h[k_index]`` with replacement ``I`` times;
    returns the mean of the resample means and their population variance.
    """
    quotients = np.asarray(design.quotients[k_index])
    n_b = quotients.size
    if n_b < 2:
        raise ValueError("need at least two pairs per perturbation to bootstrap")
    idx = stream.integers(0, n_b, size=(I, n_b))
    means = quotients[idx].mean(axis=1)
    return float(means.mean()), float(means.var(ddof=0))


def fit_pilot(design: PilotDesign, I: int, n: int, stream: RngStream,
              h_cap: float = 10.0) -> PilotFit:
    """Regress bootstrap moments on the pilot design and plug in h_opt.

    The mean regression is ordinary least squares on ``(1, h^2)``; the
    variance regression is least squares through the origin on
    ``1/(2 * n_b * h^2)``.  ``n`` is the batch size entering the plug-in
    formula ``h_opt = (sigma2 / (4 n B^2))^(1/6)``, which is clamped to
    ``h_cap`` times the largest pilot perturbation when degenerate.
    """
    K = design.h.size
    mean_star = np.empty(K)
    var_star = np.empty(K)
    for k in range(K):
        mean_star[k], var_star[k] = bootstrap_moments(design, k, I, stream)

    X = np.column_stack([np.ones(K), design.h ** 2])
    (g_hat, B_hat), *_ = np.linalg.lstsq(X, mean_star, rcond=None)

    regressor = 1.0 / (2.0 * design.counts * design.h ** 2)
    sigma2_hat = max(float(regressor @ var_star) / float(regressor @ regressor), 0.0)

    cap = h_cap * float(design.h.max())
    return _finish_fit(float(g_hat), float(B_hat), sigma2_hat, n, design, cap)


def _finish_fit(g_hat: float, B_hat: float, sigma2_hat: float, n: int,
                design: PilotDesign, cap: float) -> PilotFit:
    h_max = float(design.h.max())
    h_min = float(design.h.min())
    if B_hat == 0.0 and sigma2_hat == 0.0:
        return PilotFit(g_hat, B_hat, sigma2_hat, h_max, clamped=True)
    if B_hat == 0.0:
        return PilotFit(g_hat, B_hat, sigma2_hat, cap, clamped=True)
    h_opt = (sigma2_hat / (4.0 * n * B_hat ** 2)) ** (1.0 / 6.0)
    if not np.isfinite(h_opt) or h_opt > cap:
        return PilotFit(g_hat, B_hat, sigma2_hat, cap, clamped=True)
    if h_opt <= 0.0:
        # sigma2_hat regressed to zero: noiseless quotients, smallest bias wins
        return PilotFit(g_hat, B_hat, sigma2_hat, h_min, clamped=True)
    return PilotFit(g_hat, B_hat, sigma2_hat, h_opt, clamped=False)


def fit_pilot_capped(design: PilotDesign, config: CorCfdConfig, n: int,
                     stream: RngStream) -> PilotFit:
    """As :func:`fit_pilot` with bootstrap count and cap from ``config``."""
    return fit_pilot(design, config.I, n, stream, h_cap=config.h_cap)


def transform_sample(raw_quotient, h_k: float, fit: PilotFit):
    """Affine map of a raw quotient to the estimated optimal perturbation."""
    if h_k == fit.h_opt:
        # the map is the identity here; skip it so the round trip through
        # the centering terms cannot perturb the sample in the last bit
        return np.copy(raw_quotient)
    adjusted = raw_quotient - fit.g_hat - fit.B_hat * h_k ** 2
    return (h_k / fit.h_opt) * adjusted + fit.g_hat + fit.B_hat * fit.h_opt ** 2


def _draw_design(problem: Problem, x: np.ndarray, i: int, h: np.ndarray,
                 counts: np.ndarray, budget: EvaluationBudget,
                 stream: RngStream) -> tuple[list, int]:
    """Evaluate pairs at each perturbation; truncated by the budget.

    Returns per-perturbation quotient arrays and the number of pairs
    actually drawn.  The evaluation order is pair-major within each
    perturbation, smallest stream impact first.
    """
    requested = int(np.sum(counts))
    affordable = min(requested, budget.remaining // 2)
    direction = np.zeros(problem.dim)
    direction[i] = 1.0

    per_k = []
    left = affordable
    for k in range(h.size):
        take = min(int(counts[k]), left)
        per_k.append(take)
        left -= take

    points = []
    for k, take in enumerate(per_k):
        if take == 0:
            continue
        block = np.empty((2 * take, problem.dim))
        block[0::2] = x + h[k] * direction
        block[1::2] = x - h[k] * direction
        points.append(block)
    quotients: list[np.ndarray] = [np.empty(0) for _ in per_k]
    if points:
        values = evaluate_batch(problem, np.vstack(points), budget, stream)
        offset = 0
        for k, take in enumerate(per_k):
            if take == 0:
                continue
            block = values[offset:offset + 2 * take]
            quotients[k] = (block[0::2] - block[1::2]) / (2.0 * h[k])
            offset += 2 * take
    return quotients, affordable


def _assemble(design: PilotDesign, fit: PilotFit) -> tuple[float, float]:
    transformed = np.concatenate([
        transform_sample(design.quotients[k], design.h[k], fit)
        for k in range(design.h.size)
        if design.quotients[k].size
    ])
    estimate = float(transformed.mean())
    variance = float(transformed.var(ddof=1)) if transformed.size >= 2 else 0.0
    return estimate, variance


def cor_cfd_coordinate(problem: Problem, x, i: int, n_k: int,
                       config: CorCfdConfig, budget: EvaluationBudget,
                       stream: RngStream) -> CoordinateEstimate:
    """Cor-CFD estimate of one gradient coordinate from ``n_k`` pairs.

    ``n_k`` must be a multiple of ``config.K`` with at least two pairs per
    perturbation.  Consumes ``2 * n_k`` evaluations unless the budget runs
    out first, in which case the estimate is flagged partial.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    K = config.K
    if n_k % K != 0:
        raise ValueError("batch size must be a multiple of the perturbation count")
    n_b = n_k // K
    if n_b < 2:
        raise ValueError("need at least two pairs per perturbation")

    h = generate_perturbations(config, K, n_k, stream.child("perturb"))
    counts = np.full(K, n_b)
    quotients, pairs = _draw_design(problem, x, i, h, counts, budget,
                                    stream.child("pairs"))
    partial = pairs < n_k
    drawn = np.array([q.size for q in quotients])
    design = PilotDesign(h=h, counts=drawn, quotients=quotients)

    if np.count_nonzero(drawn >= 2) < 2:
        # not enough data for any fit; unusable partial estimate
        fit = PilotFit(np.nan, np.nan, np.nan, float(h.max()), clamped=True)
        return CoordinateEstimate(np.nan, np.nan, fit, design, pairs, partial=True)

    usable = drawn >= 2
    fit_design = PilotDesign(h=h[usable], counts=drawn[usable],
                             quotients=[q for q, u in zip(quotients, usable) if u])
    fit = fit_pilot_capped(fit_design, config, max(pairs, 1),
                           stream.child("bootstrap"))
    estimate, variance = _assemble(fit_design, fit)
    return CoordinateEstimate(estimate, variance, fit, design, pairs, partial)


def cor_cfd_gradient(problem: Problem, x, n_k: int, config: CorCfdConfig,
                     budget: EvaluationBudget, stream: RngStream) -> GradientEstimate:
    """Per-coordinate Cor-CFD gradient; ``2 * d * n_k`` evaluations total.

    ``n_k`` is rounded up to the next multiple of ``config.K``.  Coordinates
    use independent child streams, so their sample sets are independent.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n_k = round_up_to_multiple(max(n_k, 2 * config.K), config.K)
    coords = [
        cor_cfd_coordinate(problem, x, i, n_k, config, budget,
                           stream.child("coord", i))
        for i in range(problem.dim)
    ]
    g = np.array([c.estimate for c in coords])
    var = np.array([c.sample_variance for c in coords])
    return GradientEstimate(g=g, var=var, n_k=n_k, coordinates=coords)


def augment_gradient(existing: GradientEstimate, target_n: int,
                     problem: Problem, x, config: CorCfdConfig,
                     budget: EvaluationBudget, stream: RngStream) -> GradientEstimate:
    """Grow an estimate to ``target_n`` pairs per coordinate and refit.

    New pairs reuse the existing perturbations, spread evenly with any
    remainder going to the smallest perturbations first; the pilot fit and
    all transforms are recomputed on the pooled samples.
    """
    if target_n <= existing.n_k:
        raise ValueError("target batch size must exceed the current one")
    if target_n % config.K != 0:
        raise ValueError("target batch size must be a multiple of the perturbation count")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    delta = target_n - existing.n_k

    coords = []
    for i, coord in enumerate(existing.coordinates):
        h = coord.design.h
        K = h.size
        extra = np.full(K, delta // K)
        remainder = delta % K
        if remainder:
            smallest = np.argsort(h)[:remainder]
            extra[smallest] += 1

        quotients, pairs = _draw_design(
            problem, x, i, h, extra, budget, stream.child("augment", i))
        pooled = [
            np.concatenate([coord.design.quotients[k], quotients[k]])
            for k in range(K)
        ]
        drawn = np.array([q.size for q in pooled])
        design = PilotDesign(h=h, counts=drawn, quotients=pooled)
        partial = coord.partial or (pairs < int(np.sum(extra)))

        fit = fit_pilot_capped(design, config, int(np.sum(drawn)),
                               stream.child("bootstrap2", i))
        estimate, variance = _assemble(design, fit)
        coords.append(CoordinateEstimate(estimate, variance, fit, design,
                                         coord.pairs + pairs, partial))

    g = np.array([c.estimate for c in coords])
    var = np.array([c.sample_variance for c in coords])
    n_actual = min(c.design.n for c in coords)
    return GradientEstimate(g=g, var=var, n_k=n_actual if any(c.partial for c in coords) else target_n,
                            coordinates=coords)
