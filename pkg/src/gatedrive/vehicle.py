"""Vehicle state, actuator limits and the kinematic bicycle plant."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.33
    steer_min: float = -0.4189
    steer_max: float = 0.4189
    speed_min: float = 0.0
    speed_max: float = 6.0
    collision_radius: float = 0.25
    # first-order actuator lag; 0 means the command is applied instantly
    steer_time_constant: float = 0.1
    speed_time_constant: float = 0.3

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if not self.steer_min < 0 < self.steer_max:
            raise ValueError("steering limits must bracket zero")
        if not 0 <= self.speed_min < self.speed_max:
            raise ValueError("speed limits must satisfy 0 <= min < max")
        if self.collision_radius <= 0:
            raise ValueError("collision_radius must be positive")

    def without_lag(self) -> "VehicleParams":
        return replace(self, steer_time_constant=0.0, speed_time_constant=0.0)


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float
    speed: float = 0.0
    steering: float = 0.0


@dataclass(frozen=True)
class AckermannCommand:
    steering: float
    speed: float


STOP = AckermannCommand(0.0, 0.0)


def saturate(cmd: AckermannCommand, params: VehicleParams) -> AckermannCommand:
    """Clamp a command component-wise to the actuator box."""
    d = min(max(cmd.steering, params.steer_min), params.steer_max)
    v = min(max(cmd.speed, params.speed_min), params.speed_max)
    return AckermannCommand(d, v)


def _lag(current: float, target: float, tau: float, dt: float) -> float:
    if tau <= 0.0:
        return target
    return current + (target - current) * (1.0 - math.exp(-dt / tau))


def step_bicycle(
    state: VehicleState, cmd: AckermannCommand, params: VehicleParams, dt: float
) -> VehicleState:
    """Advance the kinematic bicycle by ``dt``.

    The actuators first move toward the (already saturated) command through
    their first-order lags; the pose is then integrated with forward Euler
    using the updated speed and steering.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    steering = _lag(state.steering, cmd.steering, params.steer_time_constant, dt)
    steering = min(max(steering, params.steer_min), params.steer_max)
    speed = max(_lag(state.speed, cmd.speed, params.speed_time_constant, dt), 0.0)
    x = state.x + speed * math.cos(state.heading) * dt
    y = state.y + speed * math.sin(state.heading) * dt
    heading = wrap_angle(state.heading + speed / params.wheelbase * math.tan(steering) * dt)
    return VehicleState(x, y, heading, speed, steering)
