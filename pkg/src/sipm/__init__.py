"""Stochastic interior-point methods for conic constrained stochastic optimization."""

from .cones import PSD, Cone, Free, InteriorPoint, Orthant, Product, SecondOrder
from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    EstimatedStationary,
    IllPosedConstraintsError,
    InternalConsistencyError,
    InvariantViolation,
    SIPMError,
)
from .estimators import EstimatorState, Schedule, Variant, schedule_at
from .kkt import AffineConstraints, search_direction, solve_dual
from .problems import (
    ConicProblem,
    MultiTaskProblem,
    QuadraticProblem,
    RobustRegressionProblem,
    StreamClusterProblem,
    multitask,
    robust_regression,
    stream_cluster,
)
from .solver import Budget, IterationRecord, Trace, run, step

__version__ = "0.1.0"

__all__ = [
    "AffineConstraints",
    "Budget",
    "Cone",
    "ConicProblem",
    "ConfigurationError",
    "DataError",
    "DomainError",
    "EstimatedStationary",
    "EstimatorState",
    "Free",
    "IllPosedConstraintsError",
    "InteriorPoint",
    "InternalConsistencyError",
    "InvariantViolation",
    "IterationRecord",
    "MultiTaskProblem",
    "Orthant",
    "PSD",
    "Product",
    "QuadraticProblem",
    "RobustRegressionProblem",
    "SIPMError",
    "Schedule",
    "SecondOrder",
    "StreamClusterProblem",
    "Trace",
    "Variant",
    "multitask",
    "robust_regression",
    "run",
    "schedule_at",
    "search_direction",
    "solve_dual",
    "step",
    "stream_cluster",
]
