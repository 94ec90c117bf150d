"""Derivative-free optimization with correlation-induced finite differences,
adaptive batch sizing, and stochastic line search."""

from .bench import ExperimentSpec, Metrics, compute_metrics, run_experiment, tune_spsa
from .corcfd import CorCfdConfig, cor_cfd_gradient
from .fd import GainSchedule
from .linesearch import LineSearchConfig
from .optim import RunConfig, Trajectory, run
from .oracle import EvaluationBudget, Problem, RngStream, make_problem

__version__ = "0.1.0"

__all__ = [
    "CorCfdConfig",
    "EvaluationBudget",
    "ExperimentSpec",
    "GainSchedule",
    "LineSearchConfig",
    "Metrics",
    "Problem",
    "RngStream",
    "RunConfig",
    "Trajectory",
    "compute_metrics",
    "cor_cfd_gradient",
    "make_problem",
    "run",
    "run_experiment",
    "tune_spsa",
]
