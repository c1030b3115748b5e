"""Prioritized distributed MPC trajectory planning for vehicle fleets.

Each vehicle runs a receding-horizon graph search over a motion-primitive
automaton; a time-variant coupling graph built from reachable-set
intersections is prioritized, oriented, and partitioned under a computation
level limit, so planning parallelizes without losing collision-avoidance
guarantees.
"""

from .coupling import (
    CouplingEdge,
    CouplingGraph,
    PriorityAssignment,
    assign_priorities,
    build_couplings,
    orient_and_weight,
)
from .geometry import (
    KERNEL_BACKEND,
    ConvexPolygon,
    PolyUnion,
    RigidTransform,
    contains,
    intersects,
    union_intersects,
)
from .mpa import (
    Mpa,
    MpaState,
    MotionPrimitive,
    ReachTable,
    build_mpa,
    build_reach_table,
    load_or_build_reach_table,
    reachable_set,
)
from .partition import LevelLimit, Partition, compute_levels, partition_greedy
from .planner import (
    ConstraintSet,
    Infeasible,
    ReferenceTrajectory,
    TrajectoryPrediction,
    fallback,
    plan,
)
from .scenarios import builtin_scenario
from .sim import RunMetrics, Scenario, Simulation, StepRecord, run
from .vehicle import VehicleInput, VehicleParams, VehicleState, footprint, integrate

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ConvexPolygon",
    "PolyUnion",
    "RigidTransform",
    "contains",
    "intersects",
    "union_intersects",
    "VehicleInput",
    "VehicleParams",
    "VehicleState",
    "footprint",
    "integrate",
    "Mpa",
    "MpaState",
    "MotionPrimitive",
    "ReachTable",
    "build_mpa",
    "build_reach_table",
    "load_or_build_reach_table",
    "reachable_set",
    "CouplingEdge",
    "CouplingGraph",
    "PriorityAssignment",
    "assign_priorities",
    "build_couplings",
    "orient_and_weight",
    "LevelLimit",
    "Partition",
    "compute_levels",
    "partition_greedy",
    "ConstraintSet",
    "Infeasible",
    "ReferenceTrajectory",
    "TrajectoryPrediction",
    "fallback",
    "plan",
    "builtin_scenario",
    "RunMetrics",
    "Scenario",
    "Simulation",
    "StepRecord",
    "run",
    "__version__",
]
