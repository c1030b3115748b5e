"""Kinematic single-track vehicle model and body footprint.

Forward-Euler sub-stepped integration with the commanded speed ramped
linearly to its target over one sample time; no reverse driving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import ConvexPolygon, normalize_angle


class VehicleModelError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.15
    body_length: float = 0.22
    body_width: float = 0.107
    max_speed: float = 1.5
    max_steering: float = 0.6

    def __post_init__(self):
        if min(self.wheelbase, self.body_length, self.body_width, self.max_speed, self.max_steering) <= 0:
            raise VehicleModelError("vehicle parameters must be positive")
        if self.body_length <= self.wheelbase:
            raise VehicleModelError("body_length must exceed wheelbase")


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    yaw: float
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))
        if self.speed < 0:
            raise VehicleModelError("no reverse driving: speed must be >= 0")


@dataclass(frozen=True)
class VehicleInput:
    steering_angle: float
    target_speed: float


def validate_input(u: VehicleInput, p: VehicleParams) -> None:
    if abs(u.steering_angle) > p.max_steering + 1e-12:
        raise VehicleModelError(f"steering {u.steering_angle} exceeds limit {p.max_steering}")
    if not (0.0 <= u.target_speed <= p.max_speed + 1e-12):
        raise VehicleModelError(f"target speed {u.target_speed} outside [0, {p.max_speed}]")


def integrate(
    s: VehicleState,
    u: VehicleInput,
    p: VehicleParams,
    dt: float,
    substeps: int = 1,
) -> VehicleState:
    """Advance the kinematic single-track model by one sample time.

    Speed follows a linear ramp from s.speed to u.target_speed over dt; each
    Euler substep uses the ramp speed at its start.
    """
    if dt <= 0 or substeps < 1:
        raise VehicleModelError("dt must be > 0 and substeps >= 1")
    validate_input(u, p)
    h = dt / substeps
    tan_delta = math.tan(u.steering_angle)
    x, y, yaw = s.x, s.y, s.yaw
    v0, vt = s.speed, u.target_speed
    for i in range(substeps):
        v = v0 + (vt - v0) * (i / substeps)
        x += v * math.cos(yaw) * h
        y += v * math.sin(yaw) * h
        yaw += v * tan_delta / p.wheelbase * h
    return VehicleState(x, y, normalize_angle(yaw), vt)


def sample_path(
    s: VehicleState,
    u: VehicleInput,
    p: VehicleParams,
    dt: float,
    substeps: int,
) -> list[VehicleState]:
    """States at every substep boundary, starting with `s` (substeps+1 entries)."""
    validate_input(u, p)
    h = dt / substeps
    tan_delta = math.tan(u.steering_angle)
    out = [s]
    x, y, yaw = s.x, s.y, s.yaw
    v0, vt = s.speed, u.target_speed
    for i in range(substeps):
        v = v0 + (vt - v0) * (i / substeps)
        x += v * math.cos(yaw) * h
        y += v * math.sin(yaw) * h
        yaw += v * tan_delta / p.wheelbase * h
        v_end = v0 + (vt - v0) * ((i + 1) / substeps)
        out.append(VehicleState(x, y, normalize_angle(yaw), v_end))
    return out


def footprint(s: VehicleState, p: VehicleParams) -> ConvexPolygon:
    """Body rectangle centered on the reference point, rotated by yaw."""
    return ConvexPolygon.rectangle(s.x, s.y, p.body_length, p.body_width, s.yaw)
