"""Motion-primitive automaton and precomputed one-step reachable occupancies.

The automaton discretizes (speed, steering) into levels; a primitive is one
sample time of integration toward an adjacent level pair, together with its
swept body occupancy. Reachable occupancies are computed offline per start
state and horizon step at the origin pose, and shifted/rotated online to the
vehicle's measured pose.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import (
    ConvexPolygon,
    PolyUnion,
    RigidTransform,
    apply_transform,
    convex_hull,
    inflate,
)
from .vehicle import VehicleInput, VehicleParams, VehicleState, footprint, sample_path

Pose = RigidTransform

CACHE_FORMAT_VERSION = 1


class MpaError(ValueError):
    pass


class MpaState(NamedTuple):
    speed: int
    steer: int


@dataclass(frozen=True)
class MotionPrimitive:
    index: int
    source: MpaState
    target: MpaState
    samples: tuple[VehicleState, ...]
    end_pose: Pose
    sweep: PolyUnion       # inflated, used for planning constraints
    sweep_raw: PolyUnion   # uninflated, used for ground-truth collision checks


@dataclass(frozen=True)
class Mpa:
    speed_levels: tuple[float, ...]
    steering_levels: tuple[float, ...]
    params: VehicleParams
    dt: float
    margin: float
    horizon: int
    substeps: int
    primitives: dict[MpaState, tuple[MotionPrimitive, ...]]

    @property
    def states(self) -> list[MpaState]:
        return sorted(self.primitives)

    def outgoing(self, s: MpaState) -> tuple[MotionPrimitive, ...]:
        try:
            return self.primitives[s]
        except KeyError:
            raise MpaError(f"unknown automaton state {s}") from None

    def standstill_state(self) -> MpaState:
        return MpaState(self.speed_levels.index(0.0), self.steering_levels.index(0.0))

    def config_key(self) -> str:
        payload = json.dumps(
            {
                "version": CACHE_FORMAT_VERSION,
                "speed_levels": list(self.speed_levels),
                "steering_levels": list(self.steering_levels),
                "params": [
                    self.params.wheelbase,
                    self.params.body_length,
                    self.params.body_width,
                    self.params.max_speed,
                    self.params.max_steering,
                ],
                "dt": self.dt,
                "margin": self.margin,
                "horizon": self.horizon,
                "substeps": self.substeps,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _swept_hull(samples: list[VehicleState], params: VehicleParams) -> ConvexPolygon:
    corners = np.concatenate([footprint(s, params).verts for s in samples])
    return ConvexPolygon(convex_hull(corners))


def build_mpa(
    speed_levels: list[float],
    steering_levels: list[float],
    params: VehicleParams,
    dt: float,
    margin: float,
    horizon: int = 7,
    substeps: int = 10,
) -> Mpa:
    """Connect every (speed, steering) level pair to all neighbors within one
    level on each axis; a primitive integrates toward the target levels."""
    speeds = tuple(float(v) for v in speed_levels)
    steers = tuple(float(v) for v in steering_levels)
    if len(speeds) < 2 or 0.0 not in speeds:
        raise MpaError("need >= 2 speed levels including 0")
    if list(speeds) != sorted(speeds) or min(speeds) < 0 or max(speeds) > params.max_speed + 1e-12:
        raise MpaError("speed levels must be ascending within [0, max_speed]")
    if sorted(steers) != sorted(-s for s in steers) or 0.0 not in steers:
        raise MpaError("steering levels must be symmetric about 0")
    if max(abs(s) for s in steers) > params.max_steering + 1e-12:
        raise MpaError("steering level exceeds max_steering")
    if list(steers) != sorted(steers):
        raise MpaError("steering levels must be ascending")
    if horizon < 1 or dt <= 0 or margin < 0:
        raise MpaError("horizon >= 1, dt > 0, margin >= 0 required")

    primitives: dict[MpaState, tuple[MotionPrimitive, ...]] = {}
    index = 0
    for i, v_from in enumerate(speeds):
        for j in range(len(steers)):
            src = MpaState(i, j)
            outs = []
            for k in range(max(0, i - 1), min(len(speeds), i + 2)):
                for l in range(max(0, j - 1), min(len(steers), j + 2)):
                    u = VehicleInput(steers[l], speeds[k])
                    start = VehicleState(0.0, 0.0, 0.0, v_from)
                    samples = sample_path(start, u, params, dt, substeps)
                    last = samples[-1]
                    hull = _swept_hull(samples, params)
                    prim = MotionPrimitive(
                        index=index,
                        source=src,
                        target=MpaState(k, l),
                        samples=tuple(samples),
                        end_pose=Pose(last.x, last.y, last.yaw),
                        sweep=inflate(PolyUnion([hull]), margin),
                        sweep_raw=PolyUnion([hull]),
                    )
                    outs.append(prim)
                    index += 1
            primitives[src] = tuple(outs)
    return Mpa(speeds, steers, params, dt, margin, horizon, substeps, primitives)


def _cluster_parts(parts: list[ConvexPolygon], max_parts: int) -> list[ConvexPolygon]:
    """Reduce a union to <= max_parts convex pieces by spatial binning of part
    centroids and hulling each bin. Over-approximates (hull >= union)."""
    if len(parts) <= max_parts:
        return parts
    centroids = np.array([p.centroid() for p in parts])
    lo = centroids.min(axis=0)
    hi = centroids.max(axis=0)
    diag = float(np.hypot(*(hi - lo))) + 1e-12
    cell = diag / math.sqrt(max_parts)
    while True:
        keys = np.floor((centroids - lo) / cell).astype(np.int64)
        bins: dict[tuple[int, int], list[int]] = {}
        for idx, key in enumerate(map(tuple, keys)):
            bins.setdefault(key, []).append(idx)
        if len(bins) <= max_parts:
            break
        cell *= 1.5
    out = []
    for key in sorted(bins):
        members = bins[key]
        if len(members) == 1:
            out.append(parts[members[0]])
        else:
            pts = np.concatenate([parts[i].verts for i in members])
            out.append(ConvexPolygon(convex_hull(pts)))
    return out


@dataclass(frozen=True)
class ReachTable:
    """Per automaton state, the horizon one-step reachable occupancies assuming
    the vehicle starts at the origin with yaw 0."""

    key: str
    horizon: int
    per_state: dict[MpaState, tuple[PolyUnion, ...]]
    radii: dict[MpaState, tuple[float, ...]] = field(default_factory=dict)

    def max_radius(self) -> float:
        return max(max(r) for r in self.radii.values())


def build_reach_table(mpa: Mpa, max_parts: int = 32) -> ReachTable:
    """Dynamic program over the automaton.

    Entry 0 of a state unions the sweeps of its outgoing primitives; entry h
    unions, over each outgoing primitive p, entry h-1 of p's target state
    transformed by p's end pose. Equivalent to enumerating all primitive
    sequences, without the exponential path expansion; unions above
    `max_parts` pieces are clustered into convex hulls (a sound
    over-approximation).
    """
    states = mpa.states
    table: dict[MpaState, list[PolyUnion]] = {
        s: [PolyUnion([p.sweep.parts[0] for p in mpa.outgoing(s)])] for s in states
    }
    for h in range(1, mpa.horizon):
        prev = {s: table[s][h - 1] for s in states}
        for s in states:
            parts: list[ConvexPolygon] = []
            for p in mpa.outgoing(s):
                parts.extend(apply_transform(prev[p.target], p.end_pose).parts)
            table[s].append(PolyUnion(_cluster_parts(parts, max_parts)))
    per_state = {s: tuple(entries) for s, entries in table.items()}
    radii = {
        s: tuple(e.radius_about(0.0, 0.0) for e in entries) for s, entries in per_state.items()
    }
    return ReachTable(mpa.config_key(), mpa.horizon, per_state, radii)


def reachable_set(table: ReachTable, state: MpaState, pose: Pose, h: int) -> PolyUnion:
    """Entry (state, h) shifted to `pose` and rotated CCW by its yaw."""
    if state not in table.per_state:
        raise MpaError(f"unknown automaton state {state}")
    if not 0 <= h < table.horizon:
        raise MpaError(f"horizon step {h} outside [0, {table.horizon})")
    return apply_transform(table.per_state[state][h], pose)


def save_reach_table(table: ReachTable, path: str | Path) -> None:
    doc = {
        "format": CACHE_FORMAT_VERSION,
        "key": table.key,
        "horizon": table.horizon,
        "states": [list(s) for s in sorted(table.per_state)],
        "entries": [
            [[p.verts.tolist() for p in entry.parts] for entry in table.per_state[s]]
            for s in sorted(table.per_state)
        ],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with gzip.open(path, "wt", encoding="utf-8") as f:
        json.dump(doc, f)


def load_reach_table(path: str | Path, expected_key: str | None = None) -> ReachTable:
    """Load a cached table; a stale or foreign key raises MpaError so callers
    can rebuild."""
    with gzip.open(path, "rt", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != CACHE_FORMAT_VERSION:
        raise MpaError("reach-table cache has an unsupported format version")
    if expected_key is not None and doc["key"] != expected_key:
        raise MpaError("reach-table cache key mismatch (stale configuration)")
    per_state: dict[MpaState, tuple[PolyUnion, ...]] = {}
    for s, entries in zip(doc["states"], doc["entries"]):
        per_state[MpaState(*s)] = tuple(
            PolyUnion([ConvexPolygon(np.array(p)) for p in entry]) for entry in entries
        )
    radii = {
        s: tuple(e.radius_about(0.0, 0.0) for e in entries) for s, entries in per_state.items()
    }
    return ReachTable(doc["key"], doc["horizon"], per_state, radii)


def default_cache_dir() -> Path:
    """Reach-table cache directory: $FLEETMPC_CACHE_DIR, else ~/.cache/fleetmpc."""
    env = os.environ.get("FLEETMPC_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "fleetmpc"


def load_or_build_reach_table(
    mpa: Mpa, cache_dir: str | Path | None = None, max_parts: int = 32
) -> ReachTable:
    if cache_dir is None:
        cache_dir = default_cache_dir()
    path = Path(cache_dir) / f"reach_{mpa.config_key()}_{max_parts}.json.gz"
    if path.exists():
        try:
            return load_reach_table(path, expected_key=mpa.config_key())
        except (MpaError, OSError, ValueError):
            pass
    table = build_reach_table(mpa, max_parts)
    save_reach_table(table, path)
    return table
