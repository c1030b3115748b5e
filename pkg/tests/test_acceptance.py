"""End-to-end acceptance suite.

Each test prints a single PASS/FAIL line with its headline numbers. The
expensive 20-vehicle loop runs are shared across the criteria that consume
them via module-scoped fixtures.
"""

import math
import statistics

import numpy as np
import pytest

from fleetmpc.mpa import MpaState, RigidTransform, build_mpa, build_reach_table
from fleetmpc.partition import LevelLimit, compute_levels, partition_exact, partition_greedy
from fleetmpc.scenarios import intersection_scenario, loop_scenario
from fleetmpc.sim import run
from fleetmpc.vehicle import VehicleParams

SEEDS = list(range(10))
LOOP_STEPS = 20


def _line(n, ok, detail):
    print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def loop_runs():
    """Metrics and records for the 20-vehicle loop: 10 seeds x 3 level limits,
    reachable-set mode."""
    limits = {
        "1": LevelLimit(1),
        "4": LevelLimit(4),
        "inf": LevelLimit.unbounded(),
    }
    out = {}
    mpa = None
    table = None
    for seed in SEEDS:
        for name, limit in limits.items():
            sc = loop_scenario(20, seed=seed, level_limit=limit)
            if mpa is None:
                sim_mpa = sc.build_mpa()
                mpa = sim_mpa
                from fleetmpc.mpa import load_or_build_reach_table

                table = load_or_build_reach_table(mpa)
            metrics, records = run(sc, LOOP_STEPS, mpa=mpa, table=table)
            out[(seed, name)] = (metrics, records)
    return out


def test_criterion_1_safety_zero_collisions(loop_runs):
    total = sum(m.collision_count for m, _ in loop_runs.values())
    ok = total == 0
    _line(1, ok, f"{len(loop_runs)} loop runs (10 seeds x limits 1/4/inf), "
                 f"total collisions = {total} (required exactly 0)")
    assert ok


def test_criterion_2_constraint_mode_dichotomy():
    prev_m, _ = run(intersection_scenario(level_limit=LevelLimit(1), constraint_mode="prev"), 20)
    reach_m, _ = run(intersection_scenario(level_limit=LevelLimit(1), constraint_mode="reach"), 20)
    prev_bad = prev_m.collision_count + prev_m.infeasible_steps
    ok = prev_bad >= 1 and reach_m.collision_count == 0
    _line(2, ok, "3-vehicle crossing, limit 1: previous-trajectory mode "
                 f"{prev_m.collision_count} collisions / {prev_m.infeasible_steps} infeasible steps "
                 f"(needs >= 1 combined); reachable-set mode {reach_m.collision_count} collisions "
                 "(needs 0)")
    assert ok


def test_criterion_3_level_limit_enforced(loop_runs):
    violations = 0
    mismatches = 0
    for (seed, name), (metrics, records) in loop_runs.items():
        if name == "inf":
            for r in records:
                per_group, _ = compute_levels(
                    r.coupling_graph.n_vehicles, list(r.coupling_graph.edges)
                )
                if r.max_level != max(per_group):
                    mismatches += 1
        else:
            limit = int(name)
            if metrics.max_levels_observed > limit:
                violations += 1
    ok = violations == 0 and mismatches == 0
    _line(3, ok, f"finite-limit violations = {violations}; unbounded steps whose level "
                 f"count differs from the full-DAG longest path = {mismatches} (both must be 0)")
    assert ok


def test_criterion_4_level_reduction(loop_runs):
    unbounded_max = max(m.max_levels_observed for (s, n), (m, _) in loop_runs.items() if n == "inf")
    capped_max = max(m.max_levels_observed for (s, n), (m, _) in loop_runs.items() if n == "4")
    reduction = 100.0 * (1.0 - capped_max / unbounded_max)
    ok = unbounded_max >= 8  # >= 2x the limit of 4
    _line(4, ok, f"unbounded max levels = {unbounded_max} (needs >= 8), capped-at-4 max = "
                 f"{capped_max}; observed reduction = {reduction:.0f}%")
    assert ok


def test_criterion_5_speed_trend(loop_runs):
    med1 = statistics.median(
        m.normalized_avg_speed for (s, n), (m, _) in loop_runs.items() if n == "1"
    )
    med4 = statistics.median(
        m.normalized_avg_speed for (s, n), (m, _) in loop_runs.items() if n == "4"
    )
    gap = med4 - med1
    ok = med4 >= med1 - 1e-12
    _line(5, ok, f"median normalized speed over 10 seeds: limit 4 = {med4:.4f}, "
                 f"limit 1 = {med1:.4f}, gap = {gap:+.4f} (limit 4 must not be lower)")
    assert ok


def test_criterion_6_reachability_soundness():
    """Every sample point of every swept occupancy of every primitive sequence
    of length <= 3 lies inside the matching one-step reachable set."""
    mpa = build_mpa([0.0, 0.75, 1.5], [-0.1, 0.0, 0.1], VehicleParams(), 0.2, 0.01, horizon=3)
    table = build_reach_table(mpa)
    rng = np.random.default_rng(0)
    checked = 0
    violations = 0
    for start in mpa.states:
        for h in range(3):
            entry = table.per_state[start][h]
            data, off, _ = entry.packed()
            # stack of sequences at depth h
            stack = [(start, RigidTransform.identity(), 0)]
            while stack:
                s, pose, depth = stack.pop()
                for p in mpa.outgoing(s):
                    if depth < h:
                        stack.append((p.target, pose.compose(p.end_pose), depth + 1))
                        continue
                    verts = pose.apply(p.sweep_raw.parts[0].verts)
                    # random interior points: convex combinations of vertices
                    wgt = rng.dirichlet(np.ones(len(verts)), size=50)
                    pts = np.vstack([verts, wgt @ verts])
                    inside = np.zeros(len(pts), dtype=bool)
                    for k in range(len(off) - 1):
                        part = data[off[k]:off[k + 1]]
                        nxt = np.roll(part, -1, axis=0)
                        cross = (
                            (nxt[:, 0] - part[:, 0])[None, :]
                            * (pts[:, 1][:, None] - part[:, 1][None, :])
                            - (nxt[:, 1] - part[:, 1])[None, :]
                            * (pts[:, 0][:, None] - part[:, 0][None, :])
                        )
                        inside |= np.all(cross >= -1e-9, axis=1)
                    checked += len(pts)
                    violations += int(np.count_nonzero(~inside))
    ok = violations == 0 and checked >= 100_000
    _line(6, ok, f"{checked} sampled occupancy points over all primitive sequences of "
                 f"length <= 3; points outside their reachable set = {violations} (must be 0)")
    assert ok


def test_criterion_7_partition_optimality():
    from test_partition import random_dag

    rng = np.random.default_rng(1234)
    ratios = []
    infeasible = 0
    worse_than_exact = 0
    for _ in range(200):
        g = random_dag(rng, max_vertices=7, max_edges=12)
        limit = LevelLimit(int(rng.integers(1, 5)))
        greedy = partition_greedy(g, limit)
        exact = partition_exact(g, limit)
        if greedy.max_levels > limit.value:
            infeasible += 1
        if greedy.cut_weight < exact.cut_weight - 1e-9:
            worse_than_exact += 1  # impossible: exact is the optimum
        if exact.cut_weight > 1e-12:
            ratios.append(greedy.cut_weight / exact.cut_weight)
    mean_ratio = statistics.fmean(ratios) if ratios else 1.0
    ok = infeasible == 0 and worse_than_exact == 0
    _line(7, ok, f"200 random DAGs: greedy limit violations = {infeasible}, "
                 f"greedy-below-optimum anomalies = {worse_than_exact}; "
                 f"mean greedy/exact cut-weight ratio = {mean_ratio:.3f} "
                 f"over {len(ratios)} nontrivial cuts")
    assert ok


def test_criterion_8_planner_optimality():
    from fleetmpc.geometry import ConvexPolygon, PolyUnion
    from fleetmpc.planner import ConstraintSet, Infeasible, ReferenceTrajectory, plan
    from fleetmpc.vehicle import VehicleState
    from test_planner import exhaustive_best

    mpa = build_mpa([0.0, 0.75, 1.5], [-0.1, 0.0, 0.1], VehicleParams(), 0.2, 0.01, horizon=3)
    rng = np.random.default_rng(4242)
    n = 3
    cost_mismatches = 0
    feasibility_mismatches = 0
    feasible_cases = 0
    for _ in range(50):
        speed_idx = int(rng.integers(0, 3))
        start = (
            VehicleState(0, 0, float(rng.uniform(-0.4, 0.4)), mpa.speed_levels[speed_idx]),
            MpaState(speed_idx, int(rng.integers(0, 3))),
        )
        ref = ReferenceTrajectory(np.cumsum(rng.uniform(-0.05, 0.3, size=(n, 2)), axis=0))
        cons = ConstraintSet.empty(n)
        for h in range(n):
            for _ in range(rng.integers(0, 3)):
                cons.parallel_obstacles[h].append(
                    PolyUnion([
                        ConvexPolygon.rectangle(
                            float(rng.uniform(-0.2, 0.6)), float(rng.uniform(-0.4, 0.4)),
                            float(rng.uniform(0.05, 0.35)), float(rng.uniform(0.05, 0.35)),
                            float(rng.uniform(0, math.pi)),
                        )
                    ])
                )
        got = plan(start, ref, mpa, cons, n)
        best = exhaustive_best(start, ref, mpa, cons, n)
        if (best is None) != isinstance(got, Infeasible):
            feasibility_mismatches += 1
        elif best is not None:
            feasible_cases += 1
            if abs(got.cost - best) > 1e-9:
                cost_mismatches += 1
    ok = cost_mismatches == 0 and feasibility_mismatches == 0
    _line(8, ok, f"50 random instances (horizon 3): cost mismatches vs exhaustive optimum = "
                 f"{cost_mismatches}, feasibility disagreements = {feasibility_mismatches} "
                 f"({feasible_cases} feasible cases)")
    assert ok


def test_criterion_9_determinism(tmp_path):
    from fleetmpc.cli import main

    args = ["run", "--scenario", "intersection3", "--steps", "5",
            "--level-limit", "1", "--seeds", "0", "1"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    same = (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    _line(9, same, "two identical CLI runs produced byte-identical metrics CSVs"
          if same else "metrics CSVs differ between identical runs")
    assert same
