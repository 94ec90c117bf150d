"""Noisy blackbox problems, budget accounting, and reproducible random streams.

A :class:`Problem` bundles a deterministic objective with a Gaussian noise
model, a feasible box, and metric-only knowledge of the optimum.  Optimizers
may only touch the objective through :func:`evaluate` / :func:`evaluate_batch`,
which charge an :class:`EvaluationBudget` and draw noise from an
:class:`RngStream`.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Problem",
    "EvaluationBudget",
    "RngStream",
    "BudgetExhausted",
    "evaluate",
    "evaluate_batch",
    "evaluate_true",
    "project",
    "make_problem",
    "PROBLEM_NAMES",
]


class BudgetExhausted(Exception):
    """Raised when an evaluation is requested from a spent budget."""


# Codes understood by the compiled trajectory kernels (see _kernels.pyx).
KERNEL_POWER4 = 0
KERNEL_SMALL_QUAD = 1
KERNEL_ROSENBROCK = 2
KERNEL_VALLEY64 = 3
KERNEL_SPHERE = 4


@dataclass(frozen=True)
class Problem:
    """A noisy blackbox with metric-only access to the truth.

    ``noise_std`` is either a constant or a map ``x -> sigma(x) >= 0``.
    ``kernel_code`` marks built-in analytic objectives that the compiled
    KWSA/SPSA trajectory kernels know how to evaluate; ``None`` means the
    generic (pure Python) driver path must be used.
    """

    name: str
    dim: int
    objective: Callable[[np.ndarray], float]
    objective_batch: Callable[[np.ndarray], np.ndarray]
    noise_std: float | Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    x0: np.ndarray
    x_star: np.ndarray
    kernel_code: int | None = None

    def __post_init__(self):
        for point, label in ((self.x0, "x0"), (self.x_star, "x_star")):
            if np.any(point < self.lower) or np.any(point > self.upper):
                raise ValueError(f"{label} lies outside the feasible box")

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def sigma_at(self, x: np.ndarray) -> float:
        if callable(self.noise_std):
            return float(self.noise_std(x))
        return float(self.noise_std)

    @property
    def constant_sigma(self) -> float | None:
        """The noise level if it is state-independent, else None."""
        return None if callable(self.noise_std) else float(self.noise_std)


@dataclass
class EvaluationBudget:
    """Counts function evaluations against a total allowance.

    ``used`` always equals ``gradient_evals + linesearch_evals``.  Runs stop
    at the first iteration boundary where ``used >= total``; operations inside
    an iteration truncate their work to what the budget still affords.
    """

    total: int
    gradient_evals: int = 0
    linesearch_evals: int = 0

    @property
    def used(self) -> int:
        return self.gradient_evals + self.linesearch_evals

    @property
    def remaining(self) -> int:
        return max(self.total - self.used, 0)

    @property
    def exhausted(self) -> bool:
        return self.used >= self.total

    def charge(self, n: int, kind: str = "gradient") -> None:
        if n < 0:
            raise ValueError("cannot charge a negative evaluation count")
        if kind == "gradient":
            self.gradient_evals += n
        elif kind == "linesearch":
            self.linesearch_evals += n
        else:
            raise ValueError(f"unknown budget category {kind!r}")


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


class RngStream:
    """A keyed, reproducible random stream.

    Streams with the same ``(seed, key)`` produce identical draw sequences;
    distinct keys give statistically independent streams.  ``child`` derives
    a sub-stream by extending the key, so parallel macroreplications and
    per-coordinate estimators never share draws.
    """

    def __init__(self, seed: int, *key):
        self.seed = int(seed)
        self.key = tuple(_key_part(p) for p in key)
        self._gen = np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        )

    def child(self, *key) -> "RngStream":
        return RngStream(self.seed, *(self.key + tuple(key)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def rademacher(self, size=None) -> np.ndarray:
        return 2 * self._gen.integers(0, 2, size=size) - 1

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation point contains non-finite coordinates")


def evaluate(problem: Problem, x, budget: EvaluationBudget, stream: RngStream,
             kind: str = "gradient") -> float:
    """One noisy draw of the objective; charges the budget by 1."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_finite(x)
    if budget.remaining < 1:
        raise BudgetExhausted
    value = float(problem.objective(x))
    sigma = problem.sigma_at(x)
    if sigma > 0.0:
        value += sigma * float(stream.standard_normal())
    budget.charge(1, kind)
    return value


def evaluate_batch(problem: Problem, xs: np.ndarray, budget: EvaluationBudget,
                   stream: RngStream, kind: str = "gradient") -> np.ndarray:
    """Noisy draws at each row of ``xs``; charges the budget by ``len(xs)``.

    Draw-for-draw identical to calling :func:`evaluate` row by row on the
    same stream (numpy generators fill batched normals sequentially).
    """
    xs = np.asarray(xs, dtype=float)
    _check_finite(xs)
    m = xs.shape[0]
    if budget.remaining < m:
        raise BudgetExhausted
    values = np.asarray(problem.objective_batch(xs), dtype=float)
    if callable(problem.noise_std):
        sigmas = np.array([problem.sigma_at(row) for row in xs])
    else:
        sigmas = float(problem.noise_std)
    if np.any(sigmas > 0.0) if np.ndim(sigmas) else sigmas > 0.0:
        values = values + sigmas * stream.standard_normal(m)
    budget.charge(m, kind)
    return values


def evaluate_true(problem: Problem, x) -> float:
    """Deterministic objective value; never counted against any budget."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_finite(x)
    return float(problem.objective(x))


def project(problem: Problem, x) -> np.ndarray:
    """Clamp ``x`` onto the feasible box, coordinate by coordinate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.clip(x, problem.lower, problem.upper)


# The objective formulas below fix an explicit multiplication order and
# summation order so that scalar, batch, and trajectory-kernel evaluations
# of the same point agree bit for bit.


def _power4(x):
    sq = x[0] * x[0]
    return sq * sq


def _power4_batch(xs):
    sq = xs[:, 0] * xs[:, 0]
    return sq * sq


def _small_quad(x):
    return 0.001 * (x[0] * x[0])


def _small_quad_batch(xs):
    return 0.001 * (xs[:, 0] * xs[:, 0])


def _rosenbrock(x):
    t = x[1] - x[0] * x[0]
    u = x[0] - 1.0
    return 100.0 * (t * t) + u * u


def _rosenbrock_batch(xs):
    t = xs[:, 1] - xs[:, 0] * xs[:, 0]
    u = xs[:, 0] - 1.0
    return 100.0 * (t * t) + u * u


def _valley64_terms(odd, even):
    d = even - odd
    u = 1.0 - odd
    t = 10.0 * (d * d) + u * u
    sq = t * t
    return sq * sq


def _valley64(x):
    terms = _valley64_terms(x[0::2], x[1::2])
    total = 0.0
    for t in terms:
        total += t
    return float(total)


def _valley64_batch(xs):
    terms = _valley64_terms(xs[:, 0::2], xs[:, 1::2])
    total = np.zeros(xs.shape[0])
    for j in range(terms.shape[1]):
        total += terms[:, j]
    return total


def _sphere(x):
    total = 0.0
    for v in x:
        total += v * v
    return 0.5 * total


def _sphere_batch(xs):
    total = np.zeros(xs.shape[0])
    for j in range(xs.shape[1]):
        total += xs[:, j] * xs[:, j]
    return 0.5 * total


def _box(dim, lo, hi):
    return np.full(dim, float(lo)), np.full(dim, float(hi))


def make_problem(name: str, sigma: float = 0.0, box: tuple | None = None,
                 x0=None, dim: int | None = None) -> Problem:
    """Build a registered test problem with optional overrides.

    ``box`` is a ``(lo, hi)`` pair applied to every coordinate; ``x0``
    overrides the start point; ``dim`` only applies to ``sphere``.
    """
    if name == "power4":
        d = 1
        lower, upper = _box(d, -50.0, 50.0)
        objective, batch = _power4, _power4_batch
        start, optimum = np.array([30.0]), np.zeros(d)
        code = KERNEL_POWER4
    elif name == "small_quad":
        d = 1
        lower, upper = _box(d, -np.inf, np.inf)
        objective, batch = _small_quad, _small_quad_batch
        start, optimum = np.array([1.0]), np.zeros(d)
        code = KERNEL_SMALL_QUAD
    elif name == "rosenbrock":
        d = 2
        lower, upper = _box(d, -np.inf, np.inf)
        objective, batch = _rosenbrock, _rosenbrock_batch
        start, optimum = np.array([-1.9, 2.0]), np.ones(d)
        code = KERNEL_ROSENBROCK
    elif name == "valley64":
        d = 64
        lower, upper = _box(d, -np.inf, np.inf)
        objective, batch = _valley64, _valley64_batch
        start = np.tile([3.0, 1.0], 32)
        optimum = np.ones(d)
        code = KERNEL_VALLEY64
    elif name == "sphere":
        d = dim if dim is not None else 1
        lower, upper = _box(d, -np.inf, np.inf)
        objective, batch = _sphere, _sphere_batch
        start, optimum = np.ones(d), np.zeros(d)
        code = KERNEL_SPHERE
    else:
        raise ValueError(f"unknown problem {name!r}")

    if box is not None:
        lower, upper = _box(d, box[0], box[1])
    if x0 is not None:
        start = np.atleast_1d(np.asarray(x0, dtype=float))

    return Problem(
        name=name, dim=d, objective=objective, objective_batch=batch,
        noise_std=float(sigma), lower=lower, upper=upper,
        x0=start, x_star=optimum, kernel_code=code,
    )


PROBLEM_NAMES = ("power4", "small_quad", "rosenbrock", "valley64", "sphere")
