"""Timed finite-state mission with a universally reachable emergency landing."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dynamics import VehicleState

GROUND_THRESHOLD = 0.05


class Phase(str, enum.Enum):
    IDLE = "Idle"
    TAKEOFF = "Takeoff"
    FOLLOW_TRAJECTORY = "FollowTrajectory"
    HOVER = "Hover"
    LAND = "Land"
    EMERGENCY_LANDING = "EmergencyLanding"
    DONE = "Done"


NOMINAL_ORDER = (Phase.IDLE, Phase.TAKEOFF, Phase.FOLLOW_TRAJECTORY, Phase.HOVER, Phase.LAND, Phase.DONE)
DESCENDING = (Phase.LAND, Phase.EMERGENCY_LANDING)


@dataclass(frozen=True)
class MissionPhase:
    phase: Phase = Phase.IDLE
    entered_at: float = 0.0

    @property
    def airborne(self) -> bool:
        return self.phase not in (Phase.IDLE, Phase.DONE)


@dataclass(frozen=True)
class ReferencePoint:
    position_ref: np.ndarray
    velocity_ref: np.ndarray

    @classmethod
    def hold(cls, position) -> "ReferencePoint":
        return cls(np.asarray(position, dtype=float).copy(), np.zeros(3))


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "figure_eight"
    center: tuple[float, float, float] = (0.0, 0.0, 1.0)
    a: float = 1.0
    b: float = 0.5
    speed: float = 0.25

    def __post_init__(self):
        if self.kind not in ("hover_setpoint", "figure_eight"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.a <= 0 or self.b <= 0 or self.speed <= 0:
            raise ValueError("semi-axes and speed must be positive")

    @cached_property
    def arc_length(self) -> float:
        """Length of one lap of the lemniscate (composite Simpson, 4096 panels)."""
        n = 4096
        s = np.linspace(0.0, 2.0 * math.pi, n + 1)
        f = self._ds_speed(s)
        h = 2.0 * math.pi / n
        return float(h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum()))

    @property
    def angular_rate(self) -> float:
        """Parameter rate ds/dt giving the configured mean path speed."""
        return 2.0 * math.pi * self.speed / self.arc_length

    @property
    def period(self) -> float:
        return self.arc_length / self.speed

    @property
    def peak_speed(self) -> float:
        if self.kind == "hover_setpoint":
            return 0.0
        s = np.linspace(0.0, 2.0 * math.pi, 2049)
        return float(self.angular_rate * self._ds_speed(s).max())

    def _ds_speed(self, s):
        return np.hypot(self.a * np.cos(s), 2.0 * self.b * np.cos(2.0 * s))

    def sample(self, tau: float) -> ReferencePoint:
        """Reference ``tau`` seconds after the trajectory started."""
        c = np.asarray(self.center, dtype=float)
        if self.kind == "hover_setpoint":
            return ReferencePoint.hold(c)
        w = self.angular_rate
        s = w * tau
        pos = c + np.array([self.a * math.sin(s), self.b * math.sin(2.0 * s), 0.0])
        vel = w * np.array([self.a * math.cos(s), 2.0 * self.b * math.cos(2.0 * s), 0.0])
        return ReferencePoint(pos, vel)


@dataclass(frozen=True)
class MissionPlan:
    takeoff_altitude: float = 1.0
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    idle_duration: float = 1.0
    takeoff_duration: float = 5.0
    follow_duration: float = 100.0
    hover_duration: float = 5.0
    ascent_rate: float = 0.3
    descent_rate: float = 0.3
    emergency_descent_rate: float = 0.3
    ground_threshold: float = GROUND_THRESHOLD
    # descent ramps aim slightly below ground so touchdown is always detected
    touchdown_z: float = -0.1

    def __post_init__(self):
        for name in ("idle_duration", "takeoff_duration", "follow_duration", "hover_duration",
                     "ascent_rate", "descent_rate", "emergency_descent_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def duration_of(self, phase: Phase) -> float:
        return {
            Phase.IDLE: self.idle_duration,
            Phase.TAKEOFF: self.takeoff_duration,
            Phase.FOLLOW_TRAJECTORY: self.follow_duration,
            Phase.HOVER: self.hover_duration,
        }.get(phase, math.inf)

    @property
    def max_reference_speed(self) -> float:
        return max(self.trajectory.peak_speed, self.ascent_rate, self.descent_rate,
                   self.emergency_descent_rate)


def fsm_step(phase: MissionPhase, plan: MissionPlan, t: float, state: VehicleState,
             emergency: bool = False) -> MissionPhase:
    """Next mission phase; a pure function of its arguments."""
    current = phase.phase
    if current is Phase.DONE:
        return phase
    if emergency and current is not Phase.EMERGENCY_LANDING:
        return MissionPhase(Phase.EMERGENCY_LANDING, t)
    if current in DESCENDING:
        if state.position_w[2] <= plan.ground_threshold:
            return MissionPhase(Phase.DONE, t)
        return phase
    if t - phase.entered_at >= plan.duration_of(current):
        nxt = NOMINAL_ORDER[NOMINAL_ORDER.index(current) + 1]
        return MissionPhase(nxt, t)
    return phase


def _ramp(start, target_z: float, rate: float, tau: float) -> ReferencePoint:
    start = np.asarray(start, dtype=float)
    dz = target_z - start[2]
    travel = min(rate * tau, abs(dz))
    pos = start.copy()
    pos[2] = start[2] + math.copysign(travel, dz)
    vel = np.zeros(3)
    if travel < abs(dz):
        vel[2] = math.copysign(rate, dz)
    return ReferencePoint(pos, vel)


def generate_reference(phase: MissionPhase, plan: MissionPlan, t: float,
                       state_at_phase_entry: VehicleState) -> ReferencePoint:
    tau = max(t - phase.entered_at, 0.0)
    anchor = state_at_phase_entry.position_w
    current = phase.phase
    if current in (Phase.IDLE, Phase.DONE):
        return ReferencePoint.hold(anchor)
    if current is Phase.TAKEOFF:
        return _ramp(anchor, plan.takeoff_altitude, plan.ascent_rate, tau)
    if current is Phase.FOLLOW_TRAJECTORY:
        return plan.trajectory.sample(tau)
    if current is Phase.HOVER:
        return ReferencePoint.hold(plan.trajectory.sample(plan.follow_duration).position_ref)
    if current is Phase.LAND:
        return _ramp(anchor, plan.touchdown_z, plan.descent_rate, tau)
    return _ramp(anchor, plan.touchdown_z, plan.emergency_descent_rate, tau)
