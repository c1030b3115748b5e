"""Command-line front end: build reach-table caches, run simulations, compare
the two parallel-constraint modes, and sweep computation-level limits.

All outputs are UTF-8 JSON/CSV and byte-deterministic for a fixed config: no
timestamps or machine-dependent values go into metrics files (per-step wall
times appear only in the JSON-lines run logs).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import statistics
import sys
from pathlib import Path

from .geometry import union_intersects
from .mpa import build_mpa, default_cache_dir, load_or_build_reach_table, save_reach_table
from .partition import LevelLimit
from .scenarios import BUILTIN_NAMES, builtin_scenario
from .sim import (
    DEFAULT_SPEED_LEVELS,
    DEFAULT_STEERING_LEVELS,
    Scenario,
    StepRecord,
    run,
    scenario_from_json,
)
from .vehicle import VehicleParams

CSV_COLUMNS = ["seed", "level_limit", "normalized_avg_speed", "max_levels", "collisions"]


def _parse_limit(text: str) -> LevelLimit:
    if text.strip().lower() in ("inf", "unbounded", "none"):
        return LevelLimit.unbounded()
    return LevelLimit(int(text))


def _limit_str(limit: LevelLimit) -> str:
    return "inf" if limit.value == math.inf else str(int(limit.value))


def _load_scenario(args, level_limit: LevelLimit | None = None, mode: str | None = None) -> Scenario:
    """Built-in name or JSON file path, with flag overrides applied."""
    name = args.scenario
    limit = level_limit
    if limit is None and args.level_limit is not None:
        limit = _parse_limit(args.level_limit)
    constraint_mode = mode if mode is not None else args.mode
    if Path(name).suffix == ".json" and Path(name).exists():
        with open(name, encoding="utf-8") as f:
            sc = scenario_from_json(json.load(f))
        overrides = {}
        if limit is not None:
            overrides["level_limit"] = limit
        if constraint_mode is not None:
            overrides["constraint_mode"] = constraint_mode
        if args.horizon is not None:
            overrides["horizon"] = args.horizon
        if args.dt is not None:
            overrides["dt"] = args.dt
        if args.margin is not None:
            overrides["margin"] = args.margin
        if overrides:
            sc = dataclasses.replace(sc, **overrides)
        return sc
    sc = builtin_scenario(name, seed=args.seeds[0], level_limit=limit,
                          constraint_mode=constraint_mode or "reach")
    overrides = {}
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.margin is not None:
        overrides["margin"] = args.margin
    if overrides:
        sc = dataclasses.replace(sc, **overrides)
    return sc


def _scenario_for_seed(args, seed: int, level_limit: LevelLimit | None = None,
                       mode: str | None = None) -> Scenario:
    saved = args.seeds
    args.seeds = [seed]
    try:
        sc = _load_scenario(args, level_limit, mode)
    finally:
        args.seeds = saved
    return sc


def _write_log(path: Path, records: list[StepRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.to_json()) + "\n")


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def cmd_build_mpa(args) -> int:
    params = VehicleParams()
    mpa = build_mpa(
        speed_levels=DEFAULT_SPEED_LEVELS,
        steering_levels=DEFAULT_STEERING_LEVELS,
        params=params,
        dt=args.dt if args.dt is not None else 0.2,
        margin=args.margin if args.margin is not None else 0.01,
        horizon=args.horizon if args.horizon is not None else 7,
    )
    cache_dir = Path(args.out) if args.out else default_cache_dir()
    table = load_or_build_reach_table(mpa, cache_dir)
    path = cache_dir / f"reach_{mpa.config_key()}_32.json.gz"
    if not path.exists():
        save_reach_table(table, path)
    print(f"reach table: {path}")
    for state in sorted(table.per_state):
        counts = [len(u.parts) for u in table.per_state[state]]
        print(f"  state (speed={state.speed}, steer={state.steer}): parts per step {counts}")
    return 0


def cmd_run(args) -> int:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in args.seeds:
        sc = _scenario_for_seed(args, seed)
        metrics, records = run(sc, args.steps)
        _write_log(out / f"log_{sc.name}_seed{seed}.jsonl", records)
        rows.append(
            {
                "seed": seed,
                "level_limit": _limit_str(sc.level_limit),
                "normalized_avg_speed": f"{metrics.normalized_avg_speed:.6f}",
                "max_levels": metrics.max_levels_observed,
                "collisions": metrics.collision_count,
            }
        )
        print(
            f"seed {seed}: normalized speed {metrics.normalized_avg_speed:.3f}, "
            f"max levels {metrics.max_levels_observed}, collisions {metrics.collision_count}"
        )
    _write_csv(out / "metrics.csv", rows, CSV_COLUMNS)
    print(f"metrics: {out / 'metrics.csv'}")
    return 0


def _prediction_conflicts(records: list[StepRecord]) -> list[bool]:
    """Per step: do any two vehicles' predicted occupancies intersect at the
    same future step? In the previous-trajectory mode this flags prediction
    inconsistency before it turns into an actual collision."""
    flags = []
    for rec in records:
        hit = False
        plans = rec.plans
        for i in range(len(plans)):
            for j in range(i + 1, len(plans)):
                for si, sj in zip(plans[i].steps, plans[j].steps):
                    if union_intersects(si.occupancy_raw, sj.occupancy_raw):
                        hit = True
                        break
                if hit:
                    break
            if hit:
                break
        flags.append(hit)
    return flags


def cmd_compare_constraints(args) -> int:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"scenario": args.scenario, "steps": args.steps, "modes": {}}
    for mode in ("prev", "reach"):
        per_seed = []
        for seed in args.seeds:
            sc = _scenario_for_seed(args, seed, mode=mode)
            metrics, records = run(sc, args.steps)
            per_seed.append(
                {
                    "seed": seed,
                    "collisions": metrics.collision_count,
                    "infeasible_steps": metrics.infeasible_steps,
                    "normalized_avg_speed": round(metrics.normalized_avg_speed, 6),
                    "prediction_conflicts": _prediction_conflicts(records),
                }
            )
        report["modes"][mode] = per_seed
    path = out / "compare_constraints.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
    for mode, rows in report["modes"].items():
        col = sum(r["collisions"] for r in rows)
        inf = sum(r["infeasible_steps"] for r in rows)
        print(f"mode {mode}: collisions {col}, infeasible steps {inf}")
    print(f"report: {path}")
    return 0


SWEEP_LIMITS = ["1", "2", "3", "4", "5", "inf"]


def cmd_sweep_levels(args) -> int:
    if len(args.seeds) < 2:
        print("sweep-levels needs at least 2 seeds for medians", file=sys.stderr)
        return 2
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    columns = [
        "level_limit",
        "median_normalized_avg_speed",
        "q1_normalized_avg_speed",
        "q3_normalized_avg_speed",
        "max_levels",
        "collisions",
    ]
    rows = []
    for limit_text in SWEEP_LIMITS:
        limit = _parse_limit(limit_text)
        speeds = []
        max_levels = 0
        collisions = 0
        for seed in args.seeds:
            sc = _scenario_for_seed(args, seed, level_limit=limit)
            metrics, _ = run(sc, args.steps)
            speeds.append(metrics.normalized_avg_speed)
            max_levels = max(max_levels, metrics.max_levels_observed)
            collisions += metrics.collision_count
        q1, med, q3 = statistics.quantiles(speeds, n=4)
        rows.append(
            {
                "level_limit": limit_text,
                "median_normalized_avg_speed": f"{med:.6f}",
                "q1_normalized_avg_speed": f"{q1:.6f}",
                "q3_normalized_avg_speed": f"{q3:.6f}",
                "max_levels": max_levels,
                "collisions": collisions,
            }
        )
        print(f"limit {limit_text}: median speed {med:.3f}, max levels {max_levels}, collisions {collisions}")
    _write_csv(out / "sweep_levels.csv", rows, columns)
    print(f"sweep: {out / 'sweep_levels.csv'}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="loop20",
                   help=f"built-in name ({', '.join(BUILTIN_NAMES)}) or scenario JSON path")
    p.add_argument("--horizon", type=int, default=None, help="prediction horizon steps (default 7)")
    p.add_argument("--dt", type=float, default=None, help="sample time in seconds (default 0.2)")
    p.add_argument("--level-limit", default=None, help='computation level limit: integer or "inf"')
    p.add_argument("--mode", choices=["reach", "prev"], default=None,
                   help="parallel constraint mode: reachable sets or shifted previous trajectories")
    p.add_argument("--steps", type=int, default=20, help="simulation steps")
    p.add_argument("--seeds", type=int, nargs="+", default=[0], help="scenario seeds")
    p.add_argument("--margin", type=float, default=None, help="occupancy inflation margin (m)")
    p.add_argument("--out", default=None, help="output directory")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="fleetmpc",
        description="Prioritized distributed MPC trajectory planning with "
                    "reachability-based collision avoidance and level-limited partitioning",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-mpa", help="precompute and cache one-step reachable sets")
    _add_common(p)
    p.set_defaults(func=cmd_build_mpa)

    p = sub.add_parser("run", help="simulate a scenario over seeds; write logs and metrics CSV")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare-constraints",
                       help="run both parallel-constraint modes on one scenario")
    _add_common(p)
    p.set_defaults(func=cmd_compare_constraints)

    p = sub.add_parser("sweep-levels",
                       help="sweep level limits {1..5, inf}; emit medians over seeds")
    _add_common(p)
    p.set_defaults(func=cmd_sweep_levels)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
