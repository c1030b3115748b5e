"""Built-in scenarios: a 3-vehicle crossing, an n-vehicle loop circuit, and a
random-path stress setup. Road geometry is simplified; interaction structure
(crossing conflicts, platooning chains) is what matters."""

from __future__ import annotations

import math

import numpy as np

from .geometry import ConvexPolygon, PolyUnion
from .mpa import MpaState
from .partition import LevelLimit
from .sim import (
    DEFAULT_SPEED_LEVELS,
    DEFAULT_STEERING_LEVELS,
    PathPolyline,
    Scenario,
    VehicleSpec,
)
from .vehicle import VehicleParams, VehicleState

_ZERO_STEER = DEFAULT_STEERING_LEVELS.index(0.0)


def _standstill() -> MpaState:
    return MpaState(0, _ZERO_STEER)


def intersection_scenario(
    seed: int = 0,
    level_limit: LevelLimit | None = None,
    constraint_mode: str = "reach",
) -> Scenario:
    """Three vehicles meeting at a 4-way crossing of two straight roads.

    Start distances and reference speeds are tuned so all three occupy the
    crossing region in the same time window.
    """
    half_road = 0.35
    ext = 4.0
    drivable = PolyUnion(
        [
            ConvexPolygon.rectangle(0.0, 0.0, 2 * ext, 2 * half_road),  # east-west road
            ConvexPolygon.rectangle(0.0, 0.0, 2 * half_road, 2 * ext, yaw=0.0),
        ]
    )
    east = PathPolyline(np.array([[-ext, -0.12], [ext, -0.12]]))
    north = PathPolyline(np.array([[0.12, -ext], [0.12, ext]]))
    west = PathPolyline(np.array([[ext, 0.12], [-ext, 0.12]]))
    # enter the crossing window together, already at cruise speed
    cruise = MpaState(3, _ZERO_STEER)
    v0 = DEFAULT_SPEED_LEVELS[3]
    vehicles = (
        VehicleSpec(VehicleState(-1.2, -0.12, 0.0, v0), cruise, 0, 1.125),
        VehicleSpec(VehicleState(0.12, -1.25, math.pi / 2, v0), cruise, 1, 1.125),
        VehicleSpec(VehicleState(1.35, 0.12, math.pi, v0), cruise, 2, 1.125),
    )
    return Scenario(
        name="intersection3",
        paths=(east, north, west),
        vehicles=vehicles,
        drivable=drivable,
        level_limit=level_limit if level_limit is not None else LevelLimit(1),
        constraint_mode=constraint_mode,
        seed=seed,
    )


def loop_scenario(
    n_vehicles: int = 20,
    seed: int = 0,
    level_limit: LevelLimit | None = None,
    constraint_mode: str = "reach",
    radius: float = 3.8,
) -> Scenario:
    """Vehicles on a circular circuit with seeded, mildly heterogeneous
    reference speeds. Spacing is dense enough that consecutive reachable sets
    overlap (long coupling chains around the ring) while leaving every vehicle
    a feasible cruise gap."""
    rng = np.random.default_rng(seed)
    ang = np.linspace(0.0, 2 * math.pi, 96, endpoint=False)
    circle = PathPolyline(
        np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1), closed=True
    )
    v_refs = rng.uniform(1.05, 1.2, size=n_vehicles)
    jitter = rng.uniform(-0.1, 0.1, size=n_vehicles)
    vehicles = []
    for i in range(n_vehicles):
        theta = 2 * math.pi * (i + 0.5 * jitter[i]) / n_vehicles
        x = radius * math.cos(theta)
        y = radius * math.sin(theta)
        yaw = theta + math.pi / 2  # tangent, counterclockwise travel
        vehicles.append(
            VehicleSpec(VehicleState(x, y, yaw, 0.0), _standstill(), 0, float(v_refs[i]))
        )
    return Scenario(
        name=f"loop{n_vehicles}",
        paths=(circle,),
        vehicles=tuple(vehicles),
        drivable=None,
        level_limit=level_limit if level_limit is not None else LevelLimit.unbounded(),
        constraint_mode=constraint_mode,
        seed=seed,
    )


def random_scenario(
    n_vehicles: int = 6,
    seed: int = 0,
    level_limit: LevelLimit | None = None,
    constraint_mode: str = "reach",
    extent: float = 3.0,
) -> Scenario:
    """Straight random paths through a central square; a stress test for
    coupling, partitioning, and constraint handling."""
    rng = np.random.default_rng(seed)
    paths = []
    vehicles = []
    for i in range(n_vehicles):
        heading = rng.uniform(0.0, 2 * math.pi)
        offset = rng.uniform(-0.8, 0.8, size=2)
        d = np.array([math.cos(heading), math.sin(heading)])
        start = offset - extent * d
        end = offset + extent * d
        paths.append(PathPolyline(np.array([start, end])))
        vehicles.append(
            VehicleSpec(
                VehicleState(start[0], start[1], heading, 0.0),
                _standstill(),
                i,
                float(rng.uniform(0.6, 1.5)),
            )
        )
    sc = Scenario(
        name=f"random{n_vehicles}",
        paths=tuple(paths),
        vehicles=tuple(vehicles),
        drivable=None,
        level_limit=level_limit if level_limit is not None else LevelLimit.unbounded(),
        constraint_mode=constraint_mode,
        seed=seed,
    )
    return sc


def single_vehicle_scenario(seed: int = 0) -> Scenario:
    path = PathPolyline(np.array([[-4.0, 0.0], [4.0, 0.0]]))
    return Scenario(
        name="single",
        paths=(path,),
        vehicles=(VehicleSpec(VehicleState(-3.5, 0.0, 0.0, 0.0), _standstill(), 0, 1.125),),
        seed=seed,
    )


def builtin_scenario(
    name: str,
    seed: int = 0,
    level_limit: LevelLimit | None = None,
    constraint_mode: str = "reach",
) -> Scenario:
    if name == "intersection3":
        return intersection_scenario(seed, level_limit, constraint_mode)
    if name.startswith("loop"):
        n = int(name[4:]) if len(name) > 4 else 20
        return loop_scenario(n, seed, level_limit, constraint_mode)
    if name.startswith("random"):
        n = int(name[6:]) if len(name) > 6 else 6
        return random_scenario(n, seed, level_limit, constraint_mode)
    if name == "single":
        return single_vehicle_scenario(seed)
    raise ValueError(f"unknown built-in scenario {name!r}")


BUILTIN_NAMES = ["intersection3", "loop20", "random6", "single"]
