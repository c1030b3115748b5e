import numpy as np
import pytest

from fleetmpc.mpa import build_mpa, build_reach_table
from fleetmpc.vehicle import VehicleParams

SMALL_SPEEDS = [0.0, 0.75, 1.5]
SMALL_STEERS = [-0.1, 0.0, 0.1]


@pytest.fixture(scope="session")
def small_mpa():
    """Reduced 3-speed x 3-steering automaton used by the oracle tests."""
    return build_mpa(
        speed_levels=SMALL_SPEEDS,
        steering_levels=SMALL_STEERS,
        params=VehicleParams(),
        dt=0.2,
        margin=0.01,
        horizon=3,
    )


@pytest.fixture(scope="session")
def small_table(small_mpa):
    return build_reach_table(small_mpa)


def random_convex(rng: np.random.Generator, scale: float = 1.0):
    """Random convex polygon: convex hull of random points, guaranteed valid."""
    from fleetmpc.geometry import ConvexPolygon, convex_hull

    n = int(rng.integers(3, 10))
    pts = rng.uniform(-scale, scale, size=(n + 4, 2))
    cx, cy = rng.uniform(-2 * scale, 2 * scale, size=2)
    hull = convex_hull(pts)
    return ConvexPolygon(hull + np.array([cx, cy]))
