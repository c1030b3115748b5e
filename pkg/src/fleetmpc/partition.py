"""Edge partitioning of the coupling DAG under a computation-level limit.

Sequential edges force an execution order between vehicles; the number of
computation levels of a group is one plus the longest directed path inside
its sequential edges. The greedy partitioner keeps heavy edges sequential
while every group stays within the level limit; an exact enumerator serves as
the optimality oracle for small graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

from .coupling import CouplingEdge, CouplingGraph

UNBOUNDED = math.inf


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class LevelLimit:
    value: float  # integer >= 1 or math.inf

    def __post_init__(self):
        if self.value != UNBOUNDED and (self.value < 1 or int(self.value) != self.value):
            raise PartitionError("level limit must be an integer >= 1 or unbounded")

    @classmethod
    def unbounded(cls) -> "LevelLimit":
        return cls(UNBOUNDED)


@dataclass(frozen=True)
class Partition:
    sequential_edges: tuple[CouplingEdge, ...]
    parallel_edges: tuple[CouplingEdge, ...]
    groups: tuple[frozenset[int], ...]
    levels_per_group: tuple[int, ...]
    level_of: dict[int, int]

    @property
    def cut_weight(self) -> float:
        return sum(e.weight for e in self.parallel_edges)

    @property
    def max_levels(self) -> int:
        return max(self.levels_per_group)

    def is_sequential(self, e: CouplingEdge) -> bool:
        return e in self.sequential_edges


def _check_acyclic(n: int, edges: list[CouplingEdge]) -> list[int]:
    """Topological order of 0..n-1 under `edges`; raises on a cycle."""
    indeg = [0] * n
    succ: list[list[int]] = [[] for _ in range(n)]
    for e in edges:
        succ[e.source].append(e.target)
        indeg[e.target] += 1
    stack = sorted(v for v in range(n) if indeg[v] == 0)
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    if len(order) != n:
        raise PartitionError("coupling graph contains a directed cycle")
    return order


def _weak_components(n: int, edges: list[CouplingEdge]) -> list[frozenset[int]]:
    parent = list(range(n))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in edges:
        a, b = find(e.source), find(e.target)
        if a != b:
            parent[max(a, b)] = min(a, b)
    comps: dict[int, set[int]] = {}
    for v in range(n):
        comps.setdefault(find(v), set()).add(v)
    return [frozenset(comps[r]) for r in sorted(comps)]


def compute_levels(
    n: int,
    sequential_edges: list[CouplingEdge],
    groups: list[frozenset[int]] | None = None,
) -> tuple[list[int], dict[int, int]]:
    """Longest-path levels: level(v) = 1 + max level over sequential
    predecessors; per-group level count is the group's maximum."""
    order = _check_acyclic(n, sequential_edges)
    pred: list[list[int]] = [[] for _ in range(n)]
    for e in sequential_edges:
        pred[e.target].append(e.source)
    level = {v: 1 for v in range(n)}
    for v in order:
        if pred[v]:
            level[v] = 1 + max(level[u] for u in pred[v])
    if groups is None:
        groups = _weak_components(n, sequential_edges)
    levels_per_group = [max(level[v] for v in grp) for grp in groups]
    return levels_per_group, level


def _depth_ok(n: int, edges: list[CouplingEdge], limit: LevelLimit) -> bool:
    if limit.value == UNBOUNDED:
        return True
    levels_per_group, _ = compute_levels(n, edges)
    return max(levels_per_group, default=1) <= limit.value


def _assemble(n: int, seq: list[CouplingEdge], par: list[CouplingEdge]) -> Partition:
    groups = _weak_components(n, seq)
    levels_per_group, level_of = compute_levels(n, seq, groups)
    return Partition(tuple(seq), tuple(par), tuple(groups), tuple(levels_per_group), level_of)


def partition_greedy(g: CouplingGraph, limit: LevelLimit) -> Partition:
    """Admit edges in descending weight order while every weakly connected
    sequential component keeps its level count within the limit."""
    _check_acyclic(g.n_vehicles, list(g.edges))
    ordered = sorted(g.edges, key=lambda e: (-e.weight, e.source, e.target))
    seq: list[CouplingEdge] = []
    par: list[CouplingEdge] = []
    for e in ordered:
        candidate = seq + [e]
        if _depth_ok(g.n_vehicles, candidate, limit):
            seq = candidate
        else:
            par.append(e)
    return _assemble(g.n_vehicles, seq, par)


def partition_exact(g: CouplingGraph, limit: LevelLimit, max_edges: int = 24) -> Partition:
    """Enumerate all sequential-edge subsets; minimize cut weight, break ties
    by the lexicographically smallest sequential index set. Test oracle only."""
    edges = sorted(g.edges, key=lambda e: (e.source, e.target))
    m = len(edges)
    if m > max_edges:
        raise PartitionError(f"exact partitioning refused for {m} > {max_edges} edges")
    _check_acyclic(g.n_vehicles, edges)
    total = sum(e.weight for e in edges)
    best: tuple[float, tuple[int, ...]] | None = None
    for k in range(m, -1, -1):
        for combo in combinations(range(m), k):
            seq = [edges[i] for i in combo]
            if not _depth_ok(g.n_vehicles, seq, limit):
                continue
            cut = total - sum(e.weight for e in seq)
            key = (cut, combo)
            if best is None or key < best:
                best = key
    assert best is not None  # the empty subset is always feasible
    chosen = set(best[1])
    seq = [edges[i] for i in chosen]
    par = [edges[i] for i in range(m) if i not in chosen]
    return _assemble(g.n_vehicles, seq, par)


def partition_to_json(p: Partition) -> dict:
    return {
        "groups": [sorted(grp) for grp in p.groups],
        "levels_per_group": list(p.levels_per_group),
        "level_of": {str(v): lvl for v, lvl in sorted(p.level_of.items())},
        "cut_weight": p.cut_weight,
        "n_sequential": len(p.sequential_edges),
        "n_parallel": len(p.parallel_edges),
    }
