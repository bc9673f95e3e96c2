"""Linearly constrained nu-SVR solved by generalized sequential minimal optimization."""

from .dual import DualProblem, DualState, ThetaLayout
from .presets import FittedModel, Kind, fit, fit_constrained, make_constraints, predict
from .problem import (
    Hyperparameters,
    LinearConstraints,
    PrimalSolution,
    ProblemValidationError,
    TrainingSet,
    validate_problem,
)
from .solver import SolveReport, Termination, solve

__all__ = [
    "DualProblem", "DualState", "ThetaLayout", "FittedModel", "Kind", "fit",
    "fit_constrained", "make_constraints", "predict", "Hyperparameters",
    "LinearConstraints", "PrimalSolution", "ProblemValidationError", "TrainingSet",
    "validate_problem", "SolveReport", "Termination", "solve",
]

__version__ = "0.1.0"
