"""Scenario description, JSON (de)serialization and built-in presets."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..advisor import PromptConfig
from ..llm_client import ClientConfig
from ..mission import MissionPlan, TrajectorySpec
from ..monitor import Thresholds


@dataclass(frozen=True)
class RopePull:
    """Periodic lateral pull. ``force_amplitude=None`` calibrates it so the
    closed loop oscillates with ``target_amplitude`` metres."""

    axis: str = "y"
    frequency: float = 0.67
    t_start: float = 50.0
    t_end: float = math.inf
    target_amplitude: float = 0.19
    force_amplitude: float | None = None


@dataclass(frozen=True)
class OscillationMonitorConfig:
    sample_rate: float = 20.0
    buffer_size: int = 256
    band: tuple[float, float] = (0.2, 2.0)
    amp_threshold: float = 0.1


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "custom"
    true_mass: float = 1.0
    controller_mass_fraction: float = 1.0
    arm_mass: float = 0.0
    # (roll, pitch) steady tilt caused by the arm mass
    arm_attitude_bias: tuple[float, float] = (0.0, 0.0)
    rope_pull: RopePull | None = None
    plan: MissionPlan = field(default_factory=MissionPlan)
    thresholds: Thresholds = field(default_factory=Thresholds)
    prompt: PromptConfig = field(default_factory=PromptConfig)
    policy: str = "rule"
    decision_period: float = 2.0
    decision_latency: float = 0.5
    control_rate: float = 100.0
    dt: float = 0.01
    duration: float = 100.0
    seed: int = 0
    steady_window: float = 20.0
    attitude_tau: float = 0.15
    oscillation: OscillationMonitorConfig = field(default_factory=OscillationMonitorConfig)
    client: ClientConfig = field(default_factory=ClientConfig)
    pace_realtime: bool = False

    def __post_init__(self):
        if not 0 < self.controller_mass_fraction <= 2:
            raise ValueError("controller_mass_fraction must lie in (0, 2]")
        if not 1.0 <= self.decision_period <= 10.0:
            raise ValueError("decision_period must lie in [1, 10] s")
        if self.dt <= 0 or self.duration <= 0:
            raise ValueError("dt and duration must be positive")
        if self.decision_latency < 0:
            raise ValueError("decision_latency must be nonnegative")
        ticks = 1.0 / (self.control_rate * self.dt)
        if ticks < 1 - 1e-9 or abs(ticks - round(ticks)) > 1e-9:
            raise ValueError("control period must be a whole number of simulation steps")
        sample_ticks = 1.0 / (self.oscillation.sample_rate * self.dt)
        if abs(sample_ticks - round(sample_ticks)) > 1e-9 or sample_ticks < 1 - 1e-9:
            raise ValueError("oscillation sample period must be a whole number of simulation steps")
        if self.policy not in ("rule", "remote", "do_nothing") and not self.policy.startswith("replay:"):
            raise ValueError(f"unknown policy {self.policy!r}")

    @property
    def controller_mass(self) -> float:
        return self.true_mass * self.controller_mass_fraction

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def replace(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)


def _mission(follow_duration=100.0, kind="figure_eight", **kw) -> MissionPlan:
    return MissionPlan(trajectory=TrajectorySpec(kind=kind), follow_duration=follow_duration, **kw)


def _presets() -> dict[str, ScenarioSpec]:
    no_tuning = PromptConfig(include_tuning_apis=False)
    return {
        "nominal": ScenarioSpec(name="nominal", duration=120.0),
        "mass_mismatch": ScenarioSpec(
            name="mass_mismatch", controller_mass_fraction=0.85, prompt=no_tuning, duration=100.0,
        ),
        "mass_mismatch_with_tuning": ScenarioSpec(
            name="mass_mismatch_with_tuning", controller_mass_fraction=0.85, duration=100.0,
        ),
        # Literal reading of "15 % of the true mass"; not an acceptance target.
        "mass_mismatch_fraction_015": ScenarioSpec(
            name="mass_mismatch_fraction_015", controller_mass_fraction=0.15, prompt=no_tuning,
            duration=100.0,
        ),
        "arm_mass": ScenarioSpec(
            name="arm_mass", arm_mass=0.210, arm_attitude_bias=(-0.2, 0.2),
            plan=_mission(kind="hover_setpoint"), thresholds=Thresholds.uniform(0.05),
            prompt=no_tuning, duration=100.0,
        ),
        "oscillation_abort": ScenarioSpec(
            name="oscillation_abort", controller_mass_fraction=0.85,
            plan=_mission(follow_duration=30.0, kind="hover_setpoint", hover_duration=40.0),
            rope_pull=RopePull(axis="y", frequency=0.67, t_start=45.0),
            duration=90.0,
        ),
    }


PRESETS = _presets()


def get_scenario(name_or_path: str) -> ScenarioSpec:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    path = Path(name_or_path)
    if path.exists():
        return load_scenario(path)
    raise KeyError(f"unknown scenario {name_or_path!r}; presets: {', '.join(sorted(PRESETS))}")


def _encode(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_encode(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return None
    return obj


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return _encode(spec)


def _build(cls, data: dict | None, nested: dict):
    if data is None:
        return None
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            value = nested[key](value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def scenario_from_dict(data: dict) -> ScenarioSpec:
    def rope(d):
        if d is None:
            return None
        d = dict(d)
        if d.get("t_end") is None:
            d["t_end"] = math.inf
        return _build(RopePull, d, {})

    return _build(ScenarioSpec, data, {
        "plan": lambda d: _build(MissionPlan, d, {"trajectory": lambda t: _build(TrajectorySpec, t, {})}),
        "thresholds": lambda d: _build(Thresholds, d, {}),
        "prompt": lambda d: _build(PromptConfig, d, {}),
        "rope_pull": rope,
        "oscillation": lambda d: _build(OscillationMonitorConfig, d, {}),
        "client": lambda d: _build(ClientConfig, d, {}),
    })


def load_scenario(path) -> ScenarioSpec:
    return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_scenario(spec: ScenarioSpec, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(spec), indent=2) + "\n", encoding="utf-8")
