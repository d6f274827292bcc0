"""Hyper-simplex fractal network toolkit."""
from ._core import BudgetExceeded, FractalError, ParameterError
from .analytics import (
    ComplexityReport,
    ReliabilityInput,
    analytic_failure,
    approx_complexity,
    approx_delay,
    complexity_filled,
    complexity_partial,
    fill_plan,
)
from .constree import ConsensusTree, build, project
from .labeling import PairLabel, TierLocator, decode_locator, encode_locator, route
from .ordering import Rotation, build_cycle, dfs_reference_order, successor
from .rebalance import PeerRecord, RebalancePlan, apply, composite_scores, plan_rebalance
from .simnet import FaultModel, SimConfig, SimReport, compare_fpd_fnd, measure_delay, run
from .topology import FractalParams, construct, count_faces, count_nodes

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded", "ComplexityReport", "ConsensusTree", "FaultModel", "FractalError",
    "FractalParams", "PairLabel", "ParameterError", "PeerRecord", "RebalancePlan",
    "ReliabilityInput", "Rotation", "SimConfig", "SimReport", "TierLocator",
    "analytic_failure", "apply", "approx_complexity", "approx_delay", "build", "build_cycle",
    "compare_fpd_fnd", "complexity_filled", "complexity_partial", "composite_scores",
    "construct", "count_faces", "count_nodes", "decode_locator", "dfs_reference_order",
    "encode_locator", "fill_plan", "measure_delay", "plan_rebalance", "project", "route",
    "run", "successor",
]
