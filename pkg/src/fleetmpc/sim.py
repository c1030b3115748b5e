"""Scenario management and level-ordered multi-vehicle simulation.

Each time step: measure states, build the coupling graph from reachable-set
intersections, prioritize and orient it, partition it under the level limit,
then plan level by level (vehicles within a level read no current-step data
from each other), execute every vehicle's first primitive, and collision-check
the executed occupancies against uninflated ground truth.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .coupling import (
    CouplingGraph,
    assign_priorities,
    build_couplings,
    coupling_graph_to_json,
    orient_and_weight,
)
from .geometry import ConvexPolygon, PolyUnion, union_intersects
from .mpa import Mpa, MpaState, Pose, ReachTable, build_mpa, load_or_build_reach_table
from .partition import LevelLimit, Partition, partition_greedy, partition_to_json
from .planner import (
    ConstraintSet,
    Infeasible,
    ReferenceTrajectory,
    TrajectoryPrediction,
    build_constraints,
    build_constraints_previous,
    fallback,
    plan,
)
from .vehicle import VehicleParams, VehicleState, footprint

DEFAULT_SPEED_LEVELS = [0.0, 0.375, 0.75, 1.125, 1.5]
DEFAULT_STEERING_LEVELS = [-0.1, -0.05, 0.0, 0.05, 0.1]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class PathPolyline:
    """Piecewise-linear reference path with arc-length parametrization."""

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ScenarioError("path needs an (n>=2, 2) point array")
        object.__setattr__(self, "points", pts)

    def _segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pts = self.points
        if self.closed:
            pts = np.concatenate([pts, pts[:1]])
        seg = np.diff(pts, axis=0)
        lens = np.hypot(seg[:, 0], seg[:, 1])
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        return pts, lens, cum

    @property
    def length(self) -> float:
        return float(self._segments()[2][-1])

    def project(self, x: float, y: float) -> float:
        """Arc position of the closest point on the path."""
        pts, lens, cum = self._segments()
        p = np.array([x, y])
        a = pts[:-1]
        d = np.diff(pts, axis=0)
        t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.maximum(lens**2, 1e-18), 0.0, 1.0)
        proj = a + t[:, None] * d
        dist2 = np.sum((proj - p) ** 2, axis=1)
        i = int(np.argmin(dist2))
        return float(cum[i] + t[i] * lens[i])

    def point_at(self, s: float) -> np.ndarray:
        pts, lens, cum = self._segments()
        total = cum[-1]
        if self.closed:
            s = s % total
        else:
            s = min(max(s, 0.0), total)
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(i, len(lens) - 1)
        t = (s - cum[i]) / max(lens[i], 1e-18)
        return pts[i] + t * (pts[i + 1] - pts[i])

    def heading_at(self, s: float) -> float:
        pts, lens, cum = self._segments()
        total = cum[-1]
        if self.closed:
            s = s % total
        else:
            s = min(max(s, 0.0), total)
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(max(i, 0), len(lens) - 1)
        d = pts[i + 1] - pts[i]
        return math.atan2(d[1], d[0])


@dataclass(frozen=True)
class VehicleSpec:
    initial_state: VehicleState
    initial_mpa_state: MpaState
    path_id: int
    v_ref: float


@dataclass(frozen=True)
class Scenario:
    name: str
    paths: tuple[PathPolyline, ...]
    vehicles: tuple[VehicleSpec, ...]
    drivable: PolyUnion | None = None
    params: VehicleParams = field(default_factory=VehicleParams)
    dt: float = 0.2
    horizon: int = 7
    level_limit: LevelLimit = field(default_factory=LevelLimit.unbounded)
    constraint_mode: str = "reach"  # "reach" | "prev"
    margin: float = 0.01
    seed: int = 0
    speed_levels: tuple[float, ...] = tuple(DEFAULT_SPEED_LEVELS)
    steering_levels: tuple[float, ...] = tuple(DEFAULT_STEERING_LEVELS)

    def __post_init__(self):
        if self.constraint_mode not in ("reach", "prev"):
            raise ScenarioError(f"unknown constraint mode {self.constraint_mode!r}")
        if self.dt <= 0 or self.horizon < 1 or self.margin < 0:
            raise ScenarioError("dt > 0, horizon >= 1, margin >= 0 required")

    def build_mpa(self) -> Mpa:
        return build_mpa(
            list(self.speed_levels),
            list(self.steering_levels),
            self.params,
            self.dt,
            self.margin,
            self.horizon,
        )

    def config_hash(self, include_mode: bool = True) -> str:
        doc = scenario_to_json(self)
        if not include_mode:
            doc.pop("level_limit", None)
            doc.pop("constraint_mode", None)
        payload = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def validate_scenario(sc: Scenario) -> None:
    feet = [footprint(v.initial_state, sc.params) for v in sc.vehicles]
    if sc.drivable is not None:
        from .geometry import contains

        for i, f in enumerate(feet):
            if not contains(sc.drivable, f):
                raise ScenarioError(f"vehicle {i} starts outside the drivable area")
    for i in range(len(feet)):
        for j in range(i + 1, len(feet)):
            if union_intersects(PolyUnion([feet[i]]), PolyUnion([feet[j]])):
                raise ScenarioError(f"vehicles {i} and {j} start overlapping")
    for v in sc.vehicles:
        if not 0 <= v.path_id < len(sc.paths):
            raise ScenarioError(f"invalid path id {v.path_id}")


def scenario_to_json(sc: Scenario) -> dict:
    return {
        "name": sc.name,
        "paths": [
            {"points": p.points.tolist(), "closed": p.closed} for p in sc.paths
        ],
        "vehicles": [
            {
                "state": [v.initial_state.x, v.initial_state.y, v.initial_state.yaw, v.initial_state.speed],
                "mpa_state": list(v.initial_mpa_state),
                "path_id": v.path_id,
                "v_ref": v.v_ref,
            }
            for v in sc.vehicles
        ],
        "drivable": None if sc.drivable is None else [p.verts.tolist() for p in sc.drivable.parts],
        "params": {
            "wheelbase": sc.params.wheelbase,
            "body_length": sc.params.body_length,
            "body_width": sc.params.body_width,
            "max_speed": sc.params.max_speed,
            "max_steering": sc.params.max_steering,
        },
        "dt": sc.dt,
        "horizon": sc.horizon,
        "level_limit": "inf" if sc.level_limit.value == math.inf else int(sc.level_limit.value),
        "constraint_mode": sc.constraint_mode,
        "margin": sc.margin,
        "seed": sc.seed,
        "speed_levels": list(sc.speed_levels),
        "steering_levels": list(sc.steering_levels),
    }


def scenario_from_json(doc: dict) -> Scenario:
    limit = doc.get("level_limit", "inf")
    return Scenario(
        name=doc["name"],
        paths=tuple(PathPolyline(np.array(p["points"]), p["closed"]) for p in doc["paths"]),
        vehicles=tuple(
            VehicleSpec(
                VehicleState(*v["state"]),
                MpaState(*v["mpa_state"]),
                v["path_id"],
                v["v_ref"],
            )
            for v in doc["vehicles"]
        ),
        drivable=None
        if doc.get("drivable") is None
        else PolyUnion([ConvexPolygon(np.array(p)) for p in doc["drivable"]]),
        params=VehicleParams(**doc["params"]),
        dt=doc["dt"],
        horizon=doc["horizon"],
        level_limit=LevelLimit.unbounded() if limit == "inf" else LevelLimit(limit),
        constraint_mode=doc.get("constraint_mode", "reach"),
        margin=doc["margin"],
        seed=doc.get("seed", 0),
        speed_levels=tuple(doc["speed_levels"]),
        steering_levels=tuple(doc["steering_levels"]),
    )


@dataclass
class VehicleRuntime:
    state: VehicleState
    mpa_state: MpaState
    plan: TrajectoryPrediction | None = None
    frozen: bool = False


@dataclass
class StepRecord:
    step: int
    coupling_graph: CouplingGraph
    partition: Partition
    feasible: list[bool]
    costs: list[float]
    executed_speeds: list[float]
    collisions: list[tuple[int, int]]
    max_level: int
    wall_time: float
    plans: tuple[TrajectoryPrediction, ...] = ()

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "coupling_graph": coupling_graph_to_json(self.coupling_graph),
            "partition": partition_to_json(self.partition),
            "feasible": self.feasible,
            "costs": [c if math.isfinite(c) else None for c in self.costs],
            "executed_speeds": self.executed_speeds,
            "collisions": [list(c) for c in self.collisions],
            "max_level": self.max_level,
            "wall_time": self.wall_time,
            "plans": [
                [[s.state.x, s.state.y, s.state.yaw, s.state.speed] for s in p.steps]
                for p in self.plans
            ],
        }


@dataclass
class RunMetrics:
    normalized_avg_speed: float
    avg_speed: float
    free_flow_speed: float
    max_levels_observed: int
    collision_count: int
    infeasible_steps: int
    per_step_levels: list[int]


def reference_for(sc: Scenario, spec: VehicleSpec, state: VehicleState) -> ReferenceTrajectory:
    path = sc.paths[spec.path_id]
    s0 = path.project(state.x, state.y)
    pts = [path.point_at(s0 + (h + 1) * spec.v_ref * sc.dt) for h in range(sc.horizon)]
    return ReferenceTrajectory(np.array(pts))


def detect_collisions(occupancies: list[PolyUnion]) -> list[tuple[int, int]]:
    """All unordered pairs whose executed (uninflated) occupancies intersect."""
    out = []
    for i in range(len(occupancies)):
        for j in range(i + 1, len(occupancies)):
            if union_intersects(occupancies[i], occupancies[j]):
                out.append((i, j))
    return out


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        mpa: Mpa | None = None,
        table: ReachTable | None = None,
        cache_dir: str | None = None,
        disable_interaction: bool = False,
        max_expansions: int = 3_000,
    ):
        validate_scenario(scenario)
        self.scenario = scenario
        self.mpa = mpa if mpa is not None else scenario.build_mpa()
        self.table = table if table is not None else load_or_build_reach_table(self.mpa, cache_dir)
        self.disable_interaction = disable_interaction
        self.max_expansions = max_expansions
        self.k = 0
        self.vehicles = [
            VehicleRuntime(v.initial_state, v.initial_mpa_state) for v in scenario.vehicles
        ]

    def _standstill_plan(self, rt: VehicleRuntime) -> TrajectoryPrediction:
        return fallback(None, self.mpa, (rt.state, rt.mpa_state), self.scenario.horizon)

    def step(self) -> StepRecord:
        sc = self.scenario
        t_start = time.perf_counter()
        n = len(self.vehicles)
        measured: list[tuple[MpaState, Pose]] = [
            (rt.mpa_state, Pose(rt.state.x, rt.state.y, rt.state.yaw)) for rt in self.vehicles
        ]

        reach_cache: dict[tuple[int, int], PolyUnion] = {}
        couplings = build_couplings(measured, self.table, sc.horizon, reach_cache)
        prio = assign_priorities(couplings, n, sc.horizon)
        graph = orient_and_weight(couplings, prio, n, sc.horizon)
        part = partition_greedy(graph, sc.level_limit)

        neighbor_states = {i: measured[i] for i in range(n)}
        previous_plans = {i: rt.plan for i, rt in enumerate(self.vehicles) if rt.plan is not None}
        feet = {
            i: PolyUnion([footprint(rt.state, sc.params)]) for i, rt in enumerate(self.vehicles)
        }

        new_plans: dict[int, TrajectoryPrediction] = {}
        feasible = [True] * n
        costs = [math.inf] * n
        max_level = max(part.levels_per_group)
        order = sorted(range(n), key=lambda v: (part.level_of[v], v))
        for i in order:
            rt = self.vehicles[i]
            if rt.frozen:
                new_plans[i] = self._standstill_plan(rt)
                feasible[i] = False
                continue
            if self.disable_interaction:
                cons = ConstraintSet.empty(sc.horizon, sc.drivable)
            elif sc.constraint_mode == "reach":
                cons = build_constraints(
                    i, graph, part, self.table, neighbor_states, new_plans,
                    sc.drivable, sc.horizon, reach_cache,
                )
            else:
                cons = build_constraints_previous(
                    i, graph, part, neighbor_states, new_plans, previous_plans, feet,
                    sc.drivable, sc.horizon,
                )
            ref = reference_for(sc, sc.vehicles[i], rt.state)
            result = plan(
                (rt.state, rt.mpa_state), ref, self.mpa, cons, sc.horizon, self.max_expansions
            )
            if isinstance(result, Infeasible):
                feasible[i] = False
                result = fallback(rt.plan, self.mpa, (rt.state, rt.mpa_state), sc.horizon)
            else:
                costs[i] = result.cost
            new_plans[i] = result

        executed_speeds = []
        executed_occ = []
        for i, rt in enumerate(self.vehicles):
            first = new_plans[i].steps[0]
            executed_occ.append(first.occupancy_raw)
            executed_speeds.append(0.5 * (rt.state.speed + first.state.speed))
            if not rt.frozen:
                rt.state = first.state
                rt.mpa_state = first.mpa_state
                rt.plan = new_plans[i]

        collisions = detect_collisions(executed_occ) if not self.disable_interaction else []
        for i, j in collisions:
            for v in (i, j):
                rt = self.vehicles[v]
                if not rt.frozen:
                    rt.frozen = True
                    rt.state = replace(rt.state, speed=0.0)
                    rt.mpa_state = MpaState(0, rt.mpa_state.steer)
                    rt.plan = None

        record = StepRecord(
            step=self.k,
            coupling_graph=graph,
            partition=part,
            feasible=feasible,
            costs=costs,
            executed_speeds=executed_speeds,
            collisions=collisions,
            max_level=max_level,
            wall_time=time.perf_counter() - t_start,
            plans=tuple(new_plans[i] for i in range(n)),
        )
        self.k += 1
        return record


_FREE_FLOW_CACHE: dict[tuple[str, int], float] = {}


def run(
    scenario: Scenario,
    n_steps: int,
    mpa: Mpa | None = None,
    table: ReachTable | None = None,
    cache_dir: str | None = None,
    free_flow: bool = False,
    max_expansions: int = 3_000,
) -> tuple[RunMetrics, list[StepRecord]]:
    """Simulate n_steps; normalized speed divides by the free-flow speed of the
    identical scenario with all inter-vehicle constraints disabled."""
    if n_steps < 1:
        raise ScenarioError("n_steps must be >= 1")
    sim = Simulation(
        scenario, mpa, table, cache_dir,
        disable_interaction=free_flow, max_expansions=max_expansions,
    )
    records = [sim.step() for _ in range(n_steps)]
    speeds = [v for r in records for v in r.executed_speeds]
    avg_speed = float(np.mean(speeds))

    if free_flow:
        ff = avg_speed
    else:
        key = (scenario.config_hash(include_mode=False), n_steps)
        if key not in _FREE_FLOW_CACHE:
            ff_metrics, _ = run(
                scenario, n_steps, mpa=sim.mpa, table=sim.table,
                free_flow=True, max_expansions=max_expansions,
            )
            _FREE_FLOW_CACHE[key] = ff_metrics.avg_speed
        ff = _FREE_FLOW_CACHE[key]

    metrics = RunMetrics(
        normalized_avg_speed=avg_speed / ff if ff > 0 else 1.0,
        avg_speed=avg_speed,
        free_flow_speed=ff,
        max_levels_observed=max(r.max_level for r in records),
        collision_count=sum(len(r.collisions) for r in records),
        infeasible_steps=sum(1 for r in records if not all(r.feasible)),
        per_step_levels=[r.max_level for r in records],
    )
    return metrics, records
