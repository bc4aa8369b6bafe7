"""Time-scaled primal-dual algorithms for linearly constrained separable convex problems."""

from .functions import L1, ElasticNet, ProxFunction, ShiftedL1, SquaredL2, ZeroFunction
from .operators import Dense, Diagonal, Identity, LinearOperator, Zero
from .problem import ProblemInstance, SaddlePoint, kkt_residual, objective_value
from .schedules import (
    ParameterSchedule,
    SequenceFamily,
    convex_rate_schedule,
    strongly_convex_rate_schedule,
    tikhonov_schedule,
)
from .solvers import InnerConfig, SolverState, init_state, step_joint, step_nonseparable, step_split

__version__ = "0.1.0"

__all__ = [
    "L1", "ElasticNet", "ProxFunction", "ShiftedL1", "SquaredL2", "ZeroFunction",
    "Dense", "Diagonal", "Identity", "LinearOperator", "Zero",
    "ProblemInstance", "SaddlePoint", "kkt_residual", "objective_value",
    "ParameterSchedule", "SequenceFamily", "convex_rate_schedule",
    "strongly_convex_rate_schedule", "tikhonov_schedule",
    "InnerConfig", "SolverState", "init_state", "step_joint", "step_nonseparable", "step_split",
]
