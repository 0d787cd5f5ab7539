"""Simulated multirotor plant.

Point mass driven by a collective thrust along the body z-axis, with roll and
pitch following their commands through a first-order lag. Yaw is fixed at
zero, so the gravity-aligned frame coincides with the world frame in heading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81


class SimulationDivergence(RuntimeError):
    """Raised when the plant leaves its valid envelope."""


@dataclass(frozen=True)
class VehicleState:
    position_w: np.ndarray
    velocity_w: np.ndarray
    roll_i: float = 0.0
    pitch_i: float = 0.0

    @classmethod
    def at(cls, x: float = 0.0, y: float = 0.0, z: float = 0.0) -> "VehicleState":
        return cls(np.array([x, y, z], dtype=float), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        """State in controller ordering ``[p, v, roll, pitch]``."""
        return np.concatenate((self.position_w, self.velocity_w, (self.roll_i, self.pitch_i)))

    def is_valid(self) -> bool:
        vec = self.as_vector()
        return bool(
            np.all(np.isfinite(vec))
            and abs(self.roll_i) < math.pi / 2
            and abs(self.pitch_i) < math.pi / 2
        )


@dataclass(frozen=True)
class ControlCommand:
    """Attitude and linearized thrust command.

    ``thrust_delta`` is relative to ``hover_thrust``, the hover thrust the
    controller *believes* in. The plant receives the absolute thrust, so a
    wrong controller mass shows up as a thrust bias.
    """

    roll_cmd: float
    pitch_cmd: float
    thrust_delta: float
    hover_thrust: float

    @property
    def thrust(self) -> float:
        return self.hover_thrust + self.thrust_delta

    @classmethod
    def disarmed(cls, hover_thrust: float = 0.0) -> "ControlCommand":
        return cls(0.0, 0.0, -hover_thrust, hover_thrust)


@dataclass(frozen=True)
class PlantParams:
    true_mass: float = 1.0
    gravity: float = GRAVITY
    attitude_tau: float = 0.15
    thrust_min: float = 0.0
    thrust_max: float = 25.0
    max_tilt: float = 0.35
    linear_drag: float = 0.0
    # None disables ground contact
    ground_z: float | None = 0.0

    def __post_init__(self):
        if self.true_mass <= 0:
            raise ValueError("true_mass must be positive")
        if self.attitude_tau <= 0:
            raise ValueError("attitude_tau must be positive")
        weight = self.true_mass * self.gravity
        if not self.thrust_min < weight < self.thrust_max:
            raise ValueError("hover thrust must lie strictly inside [thrust_min, thrust_max]")


@dataclass(frozen=True)
class PeriodicPull:
    """Sinusoidal force along one world axis, active on ``[t_start, t_end)``."""

    axis: str = "y"
    force_amplitude: float = 0.0
    frequency: float = 0.67
    t_start: float = 0.0
    t_end: float = math.inf

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ValueError(f"unknown axis {self.axis!r}")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if not self.t_start < self.t_end:
            raise ValueError("t_start must precede t_end")

    def force(self, t: float) -> np.ndarray:
        out = np.zeros(3)
        if self.t_start <= t < self.t_end:
            out["xyz".index(self.axis)] = self.force_amplitude * math.sin(
                2.0 * math.pi * self.frequency * (t - self.t_start)
            )
        return out


@dataclass(frozen=True)
class DisturbanceSpec:
    constant_force_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    # (roll, pitch) steady tilt, e.g. from a mass mounted on one arm
    attitude_bias: tuple[float, float] = (0.0, 0.0)
    added_mass: float = 0.0
    periodic_pull: PeriodicPull | None = None

    def external_force(self, t: float) -> np.ndarray:
        force = np.asarray(self.constant_force_w, dtype=float)
        if self.periodic_pull is not None:
            force = force + self.periodic_pull.force(t)
        return force


NO_DISTURBANCE = DisturbanceSpec()


def thrust_direction(roll: float, pitch: float) -> np.ndarray:
    """Body z-axis in the world frame for zero yaw."""
    cr = math.cos(roll)
    return np.array([cr * math.sin(pitch), -math.sin(roll), cr * math.cos(pitch)])


def step_plant(
    state: VehicleState,
    cmd: ControlCommand,
    params: PlantParams,
    dist: DisturbanceSpec = NO_DISTURBANCE,
    t: float = 0.0,
    dt: float = 0.01,
) -> VehicleState:
    """Advance the plant by ``dt``.

    Attitude uses the exact discretization of the first-order lag; the
    translational part is semi-implicit Euler (velocity first, then position
    with the new velocity).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    alpha = 1.0 - math.exp(-dt / params.attitude_tau)
    roll_target = cmd.roll_cmd + dist.attitude_bias[0]
    pitch_target = cmd.pitch_cmd + dist.attitude_bias[1]
    roll = state.roll_i + alpha * (roll_target - state.roll_i)
    pitch = state.pitch_i + alpha * (pitch_target - state.pitch_i)

    mass = params.true_mass + dist.added_mass
    thrust = min(max(cmd.thrust, params.thrust_min), params.thrust_max)
    accel = thrust_direction(roll, pitch) * (thrust / mass)
    accel[2] -= params.gravity
    accel += dist.external_force(t) / mass
    if params.linear_drag:
        accel -= params.linear_drag * state.velocity_w

    velocity = state.velocity_w + accel * dt
    position = state.position_w + velocity * dt

    if params.ground_z is not None and position[2] <= params.ground_z and velocity[2] <= 0.0:
        # resting contact: no penetration, no sliding
        position = np.array([state.position_w[0], state.position_w[1], params.ground_z])
        velocity = np.zeros(3)

    new_state = VehicleState(position, velocity, roll, pitch)
    if not new_state.is_valid():
        raise SimulationDivergence(f"plant left its valid envelope at t={t:.3f}s: {new_state}")
    return new_state
