"""Per-vehicle receding-horizon graph search over the motion-primitive automaton.

The optimal-control problem (track a reference, respect dynamics, stay inside
the drivable area, avoid constraint occupancies) is solved by uniform-cost
search over the horizon-layered automaton graph. Parallel higher-priority
neighbors contribute their reachable sets as obstacles; sequential
higher-priority neighbors contribute their already-planned occupancies.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .coupling import CouplingGraph
from .geometry import (
    ConvexPolygon,
    PolyUnion,
    batch_classify_in_union,
    batch_verts_intersect_packed,
    contains,
    pack_unions,
    poly_intersects_union,
)
from .mpa import MotionPrimitive, Mpa, MpaState, Pose, ReachTable, reachable_set
from .partition import Partition
from .vehicle import VehicleState

POS_GRID = 1e-3            # m, duplicate-pose detection in the search
YAW_GRID = math.radians(0.5)


class SchedulingError(RuntimeError):
    """A sequential predecessor's plan was required but not available."""


@dataclass(frozen=True)
class Infeasible:
    """Returned when no horizon-length plan survives the constraints."""

    reason: str = "no feasible node at the horizon"


@dataclass(frozen=True)
class ReferenceTrajectory:
    points: np.ndarray  # (N_p, 2) target positions, one per horizon step

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("reference must be an (N_p, 2) array")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class PlanStep:
    state: VehicleState          # state at the end of the step
    mpa_state: MpaState          # automaton state at the end of the step
    primitive: MotionPrimitive
    pose: Pose                   # pose at the start of the step
    occupancy: PolyUnion         # inflated swept occupancy over the step
    occupancy_raw: PolyUnion     # uninflated, for ground-truth collision checks


@dataclass(frozen=True)
class TrajectoryPrediction:
    steps: tuple[PlanStep, ...]
    cost: float


@dataclass
class ConstraintSet:
    parallel_obstacles: list[list[PolyUnion]]    # per horizon step
    sequential_obstacles: list[list[PolyUnion]]  # per horizon step
    drivable_area: PolyUnion | None = None

    @classmethod
    def empty(cls, horizon: int, drivable: PolyUnion | None = None) -> "ConstraintSet":
        return cls([[] for _ in range(horizon)], [[] for _ in range(horizon)], drivable)


def transform_state(pose: Pose, s: VehicleState) -> VehicleState:
    c, y = math.cos(pose.yaw), math.sin(pose.yaw)
    return VehicleState(
        pose.tx + c * s.x - y * s.y,
        pose.ty + y * s.x + c * s.y,
        pose.yaw + s.yaw,
        s.speed,
    )


def build_constraints(
    me: int,
    graph: CouplingGraph,
    part: Partition,
    table: ReachTable,
    neighbor_states: dict[int, tuple[MpaState, Pose]],
    received_plans: dict[int, TrajectoryPrediction],
    drivable: PolyUnion | None,
    horizon: int,
    reach_cache: dict[tuple[int, int], PolyUnion] | None = None,
) -> ConstraintSet:
    """Obstacles for vehicle `me` from its higher-priority in-edges."""
    cons = ConstraintSet.empty(horizon, drivable)
    cache = reach_cache if reach_cache is not None else {}
    for e in graph.in_edges(me):
        j = e.source
        if part.is_sequential(e):
            plan = received_plans.get(j)
            if plan is None:
                raise SchedulingError(
                    f"vehicle {me} requires the plan of sequential predecessor {j}"
                )
            for h in range(horizon):
                cons.sequential_obstacles[h].append(plan.steps[h].occupancy)
        else:
            state, pose = neighbor_states[j]
            for h in range(horizon):
                key = (j, h)
                if key not in cache:
                    cache[key] = reachable_set(table, state, pose, h)
                cons.parallel_obstacles[h].append(cache[key])
    return cons


def build_constraints_previous(
    me: int,
    graph: CouplingGraph,
    part: Partition,
    neighbor_states: dict[int, tuple[MpaState, Pose]],
    received_plans: dict[int, TrajectoryPrediction],
    previous_plans: dict[int, TrajectoryPrediction],
    footprints: dict[int, PolyUnion],
    drivable: PolyUnion | None,
    horizon: int,
) -> ConstraintSet:
    """Baseline parallel constraints: the neighbor's previous-step plan
    occupancies shifted forward one step (last step duplicated). A neighbor
    with no previous plan contributes its current footprint at every step."""
    cons = ConstraintSet.empty(horizon, drivable)
    for e in graph.in_edges(me):
        j = e.source
        if part.is_sequential(e):
            plan = received_plans.get(j)
            if plan is None:
                raise SchedulingError(
                    f"vehicle {me} requires the plan of sequential predecessor {j}"
                )
            for h in range(horizon):
                cons.sequential_obstacles[h].append(plan.steps[h].occupancy)
        else:
            prev = previous_plans.get(j)
            for h in range(horizon):
                if prev is None:
                    cons.parallel_obstacles[h].append(footprints[j])
                else:
                    shifted = min(h + 1, horizon - 1)
                    cons.parallel_obstacles[h].append(prev.steps[shifted].occupancy)
    return cons


class _DrivableChecker:
    """Containment test against the drivable area with a fast path: a sweep
    whose vertices all fall inside one convex part is contained."""

    def __init__(self, drivable: PolyUnion | None):
        self.drivable = drivable
        self._packed = None if drivable is None else drivable.packed()

    def classify(self, w: np.ndarray, offsets: np.ndarray) -> np.ndarray | None:
        """Batch vertex-membership classification (0 outside / 1 contained /
        2 undecided) for packed polygons; None when there is no boundary."""
        if self._packed is None:
            return None
        return batch_classify_in_union(w, offsets, self._packed)

    def check_verts(self, verts: np.ndarray) -> bool:
        if self.drivable is None:
            return True
        off = np.array([0, len(verts)], dtype=np.int64)
        cls = batch_classify_in_union(np.ascontiguousarray(verts), off, self._packed)[0]
        if cls != 2:
            return bool(cls)
        return self.check_exact(verts)

    def check_exact(self, verts: np.ndarray) -> bool:
        """Exact convex-difference containment for undecided classifications
        (vertices split across parts)."""
        return contains(self.drivable, ConvexPolygon.trusted(verts))

    def __call__(self, poly: ConvexPolygon) -> bool:
        return self.check_verts(poly.verts)


def plan(
    start: tuple[VehicleState, MpaState],
    ref: ReferenceTrajectory,
    mpa: Mpa,
    cons: ConstraintSet,
    horizon: int | None = None,
    max_expansions: int = 200_000,
) -> TrajectoryPrediction | Infeasible:
    """Best-first search; stage cost is the squared distance between the
    end-of-step position and the reference point of that step. Nodes are
    ordered by cost plus an admissible distance-bound lower estimate of the
    remaining cost, so the first node popped at the horizon depth is the
    minimum-cost feasible plan."""
    n_p = horizon if horizon is not None else mpa.horizon
    if len(ref) != n_p:
        raise ValueError(f"reference has {len(ref)} points, expected {n_p}")
    start_state, start_mpa = start
    if start_mpa not in mpa.primitives:
        raise ValueError(f"invalid automaton start state {start_mpa}")
    in_drivable = _DrivableChecker(cons.drivable_area)
    ref_pts = ref.points
    v_step = max(mpa.speed_levels) * mpa.dt
    succ = _successor_cache(mpa)
    packed = [
        pack_unions(cons.parallel_obstacles[h] + cons.sequential_obstacles[h])
        for h in range(n_p)
    ]

    def remaining(px: np.ndarray, py: np.ndarray, d: int) -> np.ndarray:
        """Admissible remaining-cost bound: end-of-step positions cannot outrun
        the top speed level."""
        if d >= n_p:
            return np.zeros_like(px)
        rem = ref_pts[d:]
        dist = np.hypot(px[:, None] - rem[None, :, 0], py[:, None] - rem[None, :, 1])
        slack = dist - v_step * np.arange(1, len(rem) + 1)
        np.maximum(slack, 0.0, out=slack)
        return np.sum(slack * slack, axis=1)

    # node storage: parallel arrays indexed by node id
    xs = [start_state.x]
    ys = [start_state.y]
    yaws = [start_state.yaw]
    mpa_states: list[MpaState] = [start_mpa]
    depths = [0]
    parents = [-1]
    prims: list[MotionPrimitive | None] = [None]
    costs = [0.0]

    best_at: dict[tuple, float] = {}
    counter = 0
    f0 = float(remaining(np.array([start_state.x]), np.array([start_state.y]), 0)[0])
    heap: list[tuple[float, int, int]] = [(f0, counter, 0)]
    expansions = 0
    while heap:
        _, _, nid = heapq.heappop(heap)
        h = depths[nid]
        if h == n_p:
            return _reconstruct(nid, xs, ys, yaws, mpa_states, parents, prims, costs)
        expansions += 1
        if expansions > max_expansions:
            return Infeasible("expansion budget exhausted")
        x, y, yaw = xs[nid], ys[nid], yaws[nid]
        cost = costs[nid]
        c, s_ = math.cos(yaw), math.sin(yaw)
        rot_t = np.array(((c, s_), (-s_, c)))
        sv = succ[mpa_states[nid]]
        # transform all successor sweeps at once
        w = sv.verts @ rot_t
        w[:, 0] += x
        w[:, 1] += y
        if packed[h] is not None:
            blocked = batch_verts_intersect_packed(w, sv.offsets, packed[h])
        else:
            blocked = np.zeros(len(sv.prims), dtype=bool)
        road_cls = in_drivable.classify(w, sv.offsets)
        ends_xy = sv.ends[:, :2] @ rot_t
        nxs = ends_xy[:, 0] + x
        nys = ends_xy[:, 1] + y
        nyaws = sv.ends[:, 2] + yaw
        d0 = nxs - ref_pts[h, 0]
        d1 = nys - ref_pts[h, 1]
        new_costs = cost + d0 * d0 + d1 * d1
        rems = remaining(nxs, nys, h + 1)
        kx = np.rint(nxs / POS_GRID).astype(np.int64)
        ky = np.rint(nys / POS_GRID).astype(np.int64)
        kyaw = np.rint(nyaws / YAW_GRID).astype(np.int64)
        for i, prim in enumerate(sv.prims):
            if blocked[i]:
                continue
            if road_cls is not None:
                if road_cls[i] == 0:
                    continue
                if road_cls[i] == 2 and not in_drivable.check_exact(
                    w[sv.offsets[i]:sv.offsets[i + 1]]
                ):
                    continue
            new_cost = float(new_costs[i])
            key = (h + 1, prim.target, int(kx[i]), int(ky[i]), int(kyaw[i]))
            seen = best_at.get(key)
            if seen is not None and seen <= new_cost:
                continue
            best_at[key] = new_cost
            xs.append(float(nxs[i]))
            ys.append(float(nys[i]))
            yaws.append(float(nyaws[i]))
            mpa_states.append(prim.target)
            depths.append(h + 1)
            parents.append(nid)
            prims.append(prim)
            costs.append(new_cost)
            counter += 1
            heapq.heappush(heap, (new_cost + float(rems[i]), counter, len(xs) - 1))
    return Infeasible()


@dataclass(frozen=True)
class _StateSuccessors:
    prims: tuple[MotionPrimitive, ...]
    verts: np.ndarray    # stacked sweep vertices of all successors
    offsets: np.ndarray  # int64 part boundaries into `verts`
    ends: np.ndarray     # (n, 3) end-pose deltas (dx, dy, dyaw)


_SEARCH_CACHES: dict[int, tuple[Mpa, dict[MpaState, _StateSuccessors]]] = {}


def _successor_cache(mpa: Mpa) -> dict[MpaState, _StateSuccessors]:
    cached = _SEARCH_CACHES.get(id(mpa))
    if cached is not None and cached[0] is mpa:
        return cached[1]
    out: dict[MpaState, _StateSuccessors] = {}
    for s in mpa.primitives:
        prims = mpa.outgoing(s)
        verts = np.ascontiguousarray(np.concatenate([p.sweep.parts[0].verts for p in prims]))
        offsets = np.zeros(len(prims) + 1, dtype=np.int64)
        np.cumsum([len(p.sweep.parts[0].verts) for p in prims], out=offsets[1:])
        ends = np.array([[p.end_pose.tx, p.end_pose.ty, p.end_pose.yaw] for p in prims])
        out[s] = _StateSuccessors(prims, verts, offsets, ends)
    _SEARCH_CACHES[id(mpa)] = (mpa, out)
    return out


def _reconstruct(nid, xs, ys, yaws, mpa_states, parents, prims, costs) -> TrajectoryPrediction:
    chain = []
    while parents[nid] != -1:
        chain.append(nid)
        nid = parents[nid]
    chain.reverse()
    steps = []
    for node in chain:
        prim = prims[node]
        par = parents[node]
        start_pose = Pose(xs[par], ys[par], yaws[par])
        steps.append(
            PlanStep(
                state=transform_state(start_pose, prim.samples[-1]),
                mpa_state=mpa_states[node],
                primitive=prim,
                pose=start_pose,
                occupancy=PolyUnion(
                    [ConvexPolygon.trusted(start_pose.apply(prim.sweep.parts[0].verts))]
                ),
                occupancy_raw=PolyUnion(
                    [ConvexPolygon.trusted(start_pose.apply(prim.sweep_raw.parts[0].verts))]
                ),
            )
        )
    return TrajectoryPrediction(tuple(steps), costs[chain[-1]] if chain else 0.0)


def _brake_primitive(mpa: Mpa, s: MpaState) -> MotionPrimitive:
    """Outgoing primitive one speed level down (floored at 0) and one steering
    level toward zero; exists for every state by the transition rule."""
    zero_steer = mpa.steering_levels.index(0.0)
    tgt_speed = max(s.speed - 1, 0)
    tgt_steer = s.steer + (0 if s.steer == zero_steer else (1 if s.steer < zero_steer else -1))
    for prim in mpa.outgoing(s):
        if prim.target == MpaState(tgt_speed, tgt_steer):
            return prim
    raise RuntimeError(f"automaton lacks a braking transition from {s}")


def _make_step(pose: Pose, prim: MotionPrimitive) -> tuple[PlanStep, Pose]:
    step = PlanStep(
        state=transform_state(pose, prim.samples[-1]),
        mpa_state=prim.target,
        primitive=prim,
        pose=pose,
        occupancy=PolyUnion([ConvexPolygon(pose.apply(prim.sweep.parts[0].verts))]),
        occupancy_raw=PolyUnion([ConvexPolygon(pose.apply(prim.sweep_raw.parts[0].verts))]),
    )
    return step, pose.compose(prim.end_pose)


def fallback(
    previous: TrajectoryPrediction | None,
    mpa: Mpa,
    current: tuple[VehicleState, MpaState],
    horizon: int | None = None,
) -> TrajectoryPrediction:
    """Shift the previous plan by one step and brake toward standstill; with
    no previous plan, brake toward standstill from the current state."""
    n_p = horizon if horizon is not None else mpa.horizon
    steps: list[PlanStep] = []
    if previous is not None:
        steps.extend(previous.steps[1:])
        if steps:
            pose = steps[-1].pose.compose(steps[-1].primitive.end_pose)
            mpa_state = steps[-1].mpa_state
        else:
            state, mpa_state = current
            pose = Pose(state.x, state.y, state.yaw)
    else:
        state, mpa_state = current
        pose = Pose(state.x, state.y, state.yaw)
    while len(steps) < n_p:
        prim = _brake_primitive(mpa, mpa_state)
        step, pose = _make_step(pose, prim)
        steps.append(step)
        mpa_state = prim.target
    return TrajectoryPrediction(tuple(steps), math.inf)


def plan_violates_constraints(pred: TrajectoryPrediction, cons: ConstraintSet) -> bool:
    """Post-hoc constraint audit, independent of search pruning."""
    for h, step in enumerate(pred.steps):
        part = step.occupancy.parts[0]
        for obs in cons.parallel_obstacles[h]:
            if poly_intersects_union(part, obs):
                return True
        for obs in cons.sequential_obstacles[h]:
            if poly_intersects_union(part, obs):
                return True
        if cons.drivable_area is not None and not contains(cons.drivable_area, part):
            return True
    return False
