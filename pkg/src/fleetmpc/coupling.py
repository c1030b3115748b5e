"""Time-variant coupling graph: reachable-set couplings, priorities, edges.

Two vehicles are coupled when any of their one-step reachable occupancies
intersect within the horizon; the earliest such step doubles as a
time-to-collision surrogate for prioritization and edge weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import PolyUnion, union_intersects
from .mpa import MpaState, Pose, ReachTable, reachable_set


@dataclass(frozen=True)
class CouplingEdge:
    source: int     # higher priority
    target: int     # lower priority
    weight: float
    earliest_step: int


@dataclass(frozen=True)
class CouplingGraph:
    n_vehicles: int
    edges: tuple[CouplingEdge, ...]

    def in_edges(self, v: int) -> list[CouplingEdge]:
        return [e for e in self.edges if e.target == v]


@dataclass(frozen=True)
class PriorityAssignment:
    """Unique ranks, 1 = highest priority."""

    priority: dict[int, int]

    def higher(self, a: int, b: int) -> int:
        return a if self.priority[a] < self.priority[b] else b


def build_couplings(
    vehicle_states: list[tuple[MpaState, Pose]],
    table: ReachTable,
    horizon: int,
    reach_cache: dict[tuple[int, int], PolyUnion] | None = None,
) -> list[tuple[int, int, int]]:
    """Unordered couplings (i, j, h*) with i < j and h* the earliest horizon
    step whose one-step reachable occupancies intersect.

    `reach_cache` maps (vehicle, step) to the transformed reachable set; pass
    a dict to share the transforms with constraint building.
    """
    n = len(vehicle_states)
    # transform lazily: most pairs are rejected by the center-distance bound
    transformed = reach_cache if reach_cache is not None else {}

    def reach(i: int, h: int) -> PolyUnion:
        key = (i, h)
        if key not in transformed:
            state, pose = vehicle_states[i]
            transformed[key] = reachable_set(table, state, pose, h)
        return transformed[key]

    def radius(i: int, h: int) -> float:
        state, _ = vehicle_states[i]
        return table.radii[state][h]

    out = []
    for i in range(n):
        for j in range(i + 1, n):
            pi = vehicle_states[i][1]
            pj = vehicle_states[j][1]
            dist = math.hypot(pi.tx - pj.tx, pi.ty - pj.ty)
            for h in range(horizon):
                if dist > radius(i, h) + radius(j, h):
                    continue
                if union_intersects(reach(i, h), reach(j, h)):
                    out.append((i, j, h))
                    break
    return out


def assign_priorities(
    couplings: list[tuple[int, int, int]],
    n: int,
    horizon: int,
) -> PriorityAssignment:
    """Rank vehicles by shortest time to a potential collision, earliest first;
    uncoupled vehicles rank behind all coupled ones; ties break by id."""
    earliest = {v: horizon for v in range(n)}
    for i, j, h in couplings:
        earliest[i] = min(earliest[i], h)
        earliest[j] = min(earliest[j], h)
    order = sorted(range(n), key=lambda v: (earliest[v], v))
    return PriorityAssignment({v: rank + 1 for rank, v in enumerate(order)})


def orient_and_weight(
    couplings: list[tuple[int, int, int]],
    prio: PriorityAssignment,
    n: int,
    horizon: int,
) -> CouplingGraph:
    """Direct each coupling from higher to lower priority, weighted by urgency
    w = (horizon - h*) / horizon in (0, 1]."""
    edges = []
    for i, j, h in couplings:
        hi = prio.higher(i, j)
        lo = j if hi == i else i
        edges.append(CouplingEdge(hi, lo, (horizon - h) / horizon, h))
    edges.sort(key=lambda e: (e.source, e.target))
    return CouplingGraph(n, tuple(edges))


def coupling_graph_to_json(g: CouplingGraph) -> dict:
    return {
        "n_vehicles": g.n_vehicles,
        "edges": [
            {"from": e.source, "to": e.target, "weight": e.weight, "earliest_step": e.earliest_step}
            for e in g.edges
        ],
    }
