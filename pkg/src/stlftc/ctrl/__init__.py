"""Barriers, the dense QP solver, the tube planner and the hierarchical policy."""

from .barrier import (BarrierSpec, FixedTimeParams, PiecewiseLinear, build_barrier, build_barriers, doa,
                      fixed_time_params, slack_bound)
from .lowlevel import LowLevelResult, low_level, tube_barrier
from .mpc import MpcResult, MpcSetup, mpc_solve
from .policy import HierarchicalController, IntegratorPlant, UnicyclePlant
from .qp import QpProblem, QpResult, kkt_residual, solve_qp

__all__ = ["BarrierSpec", "FixedTimeParams", "PiecewiseLinear", "build_barrier", "build_barriers", "doa",
           "fixed_time_params", "slack_bound", "LowLevelResult", "low_level", "tube_barrier", "MpcResult",
           "MpcSetup", "mpc_solve", "HierarchicalController", "IntegratorPlant", "UnicyclePlant",
           "QpProblem", "QpResult", "kkt_residual", "solve_qp"]
