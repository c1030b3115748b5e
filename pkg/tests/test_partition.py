import math

import numpy as np
import pytest

from fleetmpc.coupling import CouplingEdge, CouplingGraph
from fleetmpc.partition import (
    LevelLimit,
    PartitionError,
    compute_levels,
    partition_exact,
    partition_greedy,
    partition_to_json,
)


def edge(s, t, w, h=0):
    return CouplingEdge(s, t, w, h)


def chain(*weights):
    return CouplingGraph(
        len(weights) + 1,
        tuple(edge(i, i + 1, w) for i, w in enumerate(weights)),
    )


def random_dag(rng: np.random.Generator, max_vertices=7, max_edges=12) -> CouplingGraph:
    n = int(rng.integers(2, max_vertices + 1))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]  # i<j keeps it acyclic
    rng.shuffle(pairs)
    m = int(rng.integers(0, min(max_edges, len(pairs)) + 1))
    edges = tuple(
        edge(i, j, float(np.round(rng.uniform(0.1, 1.0), 3))) for i, j in pairs[:m]
    )
    return CouplingGraph(n, tuple(sorted(edges, key=lambda e: (e.source, e.target))))


# ---------------------------------------------------------------- level limit


def test_level_limit_validation():
    LevelLimit(1)
    LevelLimit(4)
    LevelLimit.unbounded()
    with pytest.raises(PartitionError):
        LevelLimit(0)
    with pytest.raises(PartitionError):
        LevelLimit(2.5)


# ---------------------------------------------------------------- levels


def test_compute_levels_chain():
    g = chain(0.9, 0.5, 0.8)
    per_group, level_of = compute_levels(4, list(g.edges))
    assert per_group == [4]
    assert level_of == {0: 1, 1: 2, 2: 3, 3: 4}


def test_compute_levels_diamond():
    edges = [edge(0, 1, 1), edge(0, 2, 1), edge(1, 3, 1), edge(2, 3, 1)]
    per_group, level_of = compute_levels(4, edges)
    assert level_of == {0: 1, 1: 2, 2: 2, 3: 3}
    assert per_group == [3]


def test_compute_levels_disconnected():
    edges = [edge(0, 1, 1)]
    per_group, level_of = compute_levels(4, edges)
    # components: {0,1}, {2}, {3}
    assert sorted(per_group) == [1, 1, 2]
    assert level_of[2] == 1 and level_of[3] == 1


def test_cycle_detected():
    edges = [edge(0, 1, 1), edge(1, 2, 1), edge(2, 0, 1)]
    with pytest.raises(PartitionError):
        compute_levels(3, edges)


# ---------------------------------------------------------------- greedy


def test_limit_one_makes_everything_parallel():
    g = chain(0.9, 0.5, 0.8)
    p = partition_greedy(g, LevelLimit(1))
    assert p.sequential_edges == ()
    assert set(p.parallel_edges) == set(g.edges)
    assert p.max_levels == 1
    assert p.cut_weight == pytest.approx(0.9 + 0.5 + 0.8)


def test_unbounded_keeps_everything_sequential():
    g = chain(0.9, 0.5, 0.8)
    p = partition_greedy(g, LevelLimit.unbounded())
    assert set(p.sequential_edges) == set(g.edges)
    assert p.parallel_edges == ()
    assert p.max_levels == 4
    assert p.cut_weight == 0.0


def test_chain_limit_two_cuts_lightest_edge():
    g = chain(0.9, 0.5, 0.8)
    p = partition_greedy(g, LevelLimit(2))
    assert {e.weight for e in p.parallel_edges} == {0.5}
    assert {e.weight for e in p.sequential_edges} == {0.9, 0.8}
    assert p.max_levels == 2
    assert p.cut_weight == pytest.approx(0.5)


def test_greedy_respects_limit_on_random_dags():
    rng = np.random.default_rng(17)
    for _ in range(100):
        g = random_dag(rng)
        for lim in (1, 2, 3):
            p = partition_greedy(g, LevelLimit(lim))
            assert p.max_levels <= lim
            assert set(p.sequential_edges) | set(p.parallel_edges) == set(g.edges)
            assert len(p.sequential_edges) + len(p.parallel_edges) == len(g.edges)


def test_greedy_monotone_in_limit():
    """A looser limit never cuts more weight."""
    rng = np.random.default_rng(19)
    for _ in range(50):
        g = random_dag(rng)
        cuts = [partition_greedy(g, LevelLimit(lim)).cut_weight for lim in (1, 2, 3, 4)]
        for a, b in zip(cuts, cuts[1:]):
            assert b <= a + 1e-12


def test_greedy_deterministic():
    rng = np.random.default_rng(23)
    g = random_dag(rng)
    p1 = partition_greedy(g, LevelLimit(2))
    p2 = partition_greedy(g, LevelLimit(2))
    assert p1.sequential_edges == p2.sequential_edges
    assert p1.parallel_edges == p2.parallel_edges


def test_greedy_rejects_cyclic_input():
    g = CouplingGraph(2, (edge(0, 1, 1.0), edge(1, 0, 1.0)))
    with pytest.raises(PartitionError):
        partition_greedy(g, LevelLimit(2))


# ---------------------------------------------------------------- exact oracle


def test_exact_chain_limit_two():
    g = chain(0.9, 0.5, 0.8)
    p = partition_exact(g, LevelLimit(2))
    assert p.cut_weight == pytest.approx(0.5)
    assert p.max_levels == 2


def test_exact_refuses_large_graphs():
    edges = tuple(edge(i, j, 1.0) for i in range(8) for j in range(i + 1, 8))[:25]
    g = CouplingGraph(8, edges)
    with pytest.raises(PartitionError):
        partition_exact(g, LevelLimit(2))


def test_greedy_feasible_and_never_better_than_exact():
    """Greedy is a heuristic: always within the limit, cut weight >= optimum."""
    rng = np.random.default_rng(29)
    ratios = []
    for _ in range(60):
        g = random_dag(rng, max_vertices=6, max_edges=8)
        for lim in (1, 2, 3):
            greedy = partition_greedy(g, LevelLimit(lim))
            exact = partition_exact(g, LevelLimit(lim))
            assert greedy.max_levels <= lim
            assert exact.max_levels <= lim
            assert greedy.cut_weight >= exact.cut_weight - 1e-9
            if exact.cut_weight > 0:
                ratios.append(greedy.cut_weight / exact.cut_weight)
    assert ratios  # the sample exercised nontrivial cuts


def test_partition_json_shape():
    g = chain(0.9, 0.5, 0.8)
    doc = partition_to_json(partition_greedy(g, LevelLimit(2)))
    assert doc["levels_per_group"]
    assert doc["n_sequential"] == 2
    assert doc["n_parallel"] == 1
    assert doc["cut_weight"] == pytest.approx(0.5)
    assert set(doc["level_of"]) == {"0", "1", "2", "3"}
