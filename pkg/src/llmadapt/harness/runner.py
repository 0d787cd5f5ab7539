"""Closed-loop experiment runner."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..advisor import (
    ActionName, Decision, DecisionParseError, QueryRecord, RemotePolicy, ReplayPolicy,
    RuleBasedPolicy, render_decision, render_oscillation_message,
)
from ..controller import (
    AdaptiveState, CommandLimits, GainBundle, LinearModel, LiveGains, LQRPositionController,
    compute_control, solve_dare,
)
from ..dynamics import (
    ControlCommand, DisturbanceSpec, PeriodicPull, PlantParams, VehicleState, step_plant,
)
from ..executor import ActionEffects, apply_actions
from ..llm_client import ChatClient, LLMClientError
from ..mission import MissionPhase, Phase, fsm_step, generate_reference
from ..monitor import ErrorRingBuffer, check_failures, detect_oscillation, tracking_error
from .scenarios import ScenarioSpec

logger = logging.getLogger(__name__)

MAX_TRANSPORT_FAILURES = 3
TRACKING_PHASES = (Phase.FOLLOW_TRAJECTORY, Phase.HOVER)


@dataclass(frozen=True)
class TelemetryRow:
    t: float
    pos_x: float
    pos_y: float
    pos_z: float
    ref_x: float
    ref_y: float
    ref_z: float
    err_x: float
    err_y: float
    err_z: float
    roll_cmd: float
    pitch_cmd: float
    thrust_delta: float
    thrust_offset: float
    roll_offset: float
    pitch_offset: float
    failure_codes: str
    phase: str
    decision_latency: float


@dataclass(frozen=True)
class ConversationEntry:
    t: float
    prompt: str
    response: str
    actions: tuple[str, ...]
    latency: float
    warnings: tuple[str, ...] = ()
    applied_at: float | None = None


@dataclass
class RunMetrics:
    rms_error_x: float
    rms_error_y: float
    rms_error_z: float
    max_abs_error_final_window: tuple[float, float, float]
    final_altitude_error: float
    time_to_ez_below_0_30: float | None
    time_to_ez_below_0_10: float | None
    emergency_landing_time: float | None
    first_dangerous_time: float | None
    final_phase: str
    final_altitude: float
    decisions_issued: int
    action_counts: dict[str, int]
    tuning_actions: int
    transport_failures: int
    parse_failures: int
    steady_window: float
    seed: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    spec: ScenarioSpec
    telemetry: list[TelemetryRow]
    conversation: list[ConversationEntry]
    metrics: RunMetrics
    log_lines: list[str] = field(default_factory=list)


class NullPolicy:
    """Baseline that never intervenes."""

    def decide(self, query, history=()):
        d = Decision((ActionName.DO_NOTHING,), "baseline", "Baseline policy takes no action.")
        return Decision(d.actions, d.short_label, d.explanation, render_decision(d))


def make_policy(spec: ScenarioSpec, client: ChatClient | None = None):
    valid = spec.prompt.valid_actions
    if spec.policy == "rule":
        return RuleBasedPolicy(include_tuning_apis=spec.prompt.include_tuning_apis)
    if spec.policy == "do_nothing":
        return NullPolicy()
    if spec.policy.startswith("replay:"):
        return ReplayPolicy.from_file(spec.policy.split(":", 1)[1], valid)
    if spec.policy == "remote":
        return RemotePolicy(client or ChatClient(spec.client), spec.prompt)
    raise ValueError(f"unknown policy {spec.policy!r}")


def pull_frequency_response(model: LinearModel, K: np.ndarray, axis: str, frequency: float,
                            mass: float) -> float:
    """Gain |position / force| (m/N) of the linear closed loop for a sinusoidal force."""
    i = "xyz".index(axis)
    dt = model.dt
    Bd = np.zeros(8)
    Bd[i] = 0.5 * dt * dt / mass
    Bd[3 + i] = dt / mass
    z = np.exp(1j * 2.0 * math.pi * frequency * dt)
    Acl = model.A + model.B @ K
    resp = np.linalg.solve(z * np.eye(8) - Acl, Bd)
    return float(abs(resp[i]))


def build_disturbance(spec: ScenarioSpec, model: LinearModel, K: np.ndarray) -> DisturbanceSpec:
    pull = None
    if spec.rope_pull is not None:
        rp = spec.rope_pull
        mass = spec.true_mass + spec.arm_mass
        force = rp.force_amplitude
        if force is None:
            force = rp.target_amplitude / pull_frequency_response(model, K, rp.axis, rp.frequency, mass)
        pull = PeriodicPull(rp.axis, force, rp.frequency, rp.t_start, rp.t_end)
    return DisturbanceSpec(attitude_bias=tuple(spec.arm_attitude_bias) if spec.arm_mass else (0.0, 0.0),
                           added_mass=spec.arm_mass, periodic_pull=pull)


def _settling_time(times, values, threshold) -> float | None:
    """Earliest time after which |value| stays below ``threshold`` to the end."""
    if len(times) == 0:
        return None
    above = np.flatnonzero(np.abs(values) >= threshold)
    if above.size == 0:
        return float(times[0])
    last = above[-1]
    return float(times[last + 1]) if last + 1 < len(times) else None


def compute_metrics(spec: ScenarioSpec, rows: list[TelemetryRow], conversation: list[ConversationEntry],
                    emergency_time, first_dangerous, transport_failures, parse_failures) -> RunMetrics:
    t = np.array([r.t for r in rows])
    err = np.array([[r.err_x, r.err_y, r.err_z] for r in rows])
    window = t >= t[-1] - spec.steady_window - 1e-9
    rms = np.sqrt(np.mean(err[window] ** 2, axis=0))
    tracking = np.array([r.phase in {p.value for p in TRACKING_PHASES} for r in rows])

    counts = {a.value: 0 for a in ActionName}
    for entry in conversation:
        for a in entry.actions:
            counts[a] += 1
    tuning = sum(v for k, v in counts.items() if k.startswith("tune_controller_by"))
    last = rows[-1]
    return RunMetrics(
        rms_error_x=float(rms[0]), rms_error_y=float(rms[1]), rms_error_z=float(rms[2]),
        max_abs_error_final_window=tuple(float(v) for v in np.abs(err[window]).max(axis=0)),
        final_altitude_error=float(last.err_z),
        time_to_ez_below_0_30=_settling_time(t[tracking], err[tracking, 2], 0.30),
        time_to_ez_below_0_10=_settling_time(t[tracking], err[tracking, 2], 0.10),
        emergency_landing_time=emergency_time,
        first_dangerous_time=first_dangerous,
        final_phase=last.phase,
        final_altitude=float(last.pos_z),
        decisions_issued=len(conversation),
        action_counts=counts,
        tuning_actions=tuning,
        transport_failures=transport_failures,
        parse_failures=parse_failures,
        steady_window=spec.steady_window,
        seed=spec.seed,
    )


class _Pending:
    """Decision waiting to be applied at a tick boundary."""

    def __init__(self, apply_tick: int, decision: Decision, entry_index: int):
        self.apply_tick = apply_tick
        self.decision = decision
        self.entry_index = entry_index


def run_experiment(spec: ScenarioSpec, policy=None, client: ChatClient | None = None) -> RunResult:
    """Simulate one mission in fixed steps of ``spec.dt``.

    Per tick: mission phase update, pending decisions applied, reference and
    control computed, telemetry recorded, plant advanced. Every decision
    period a query is built from the tracking error and the oscillation
    monitor, and sent to the policy.
    """
    policy = policy if policy is not None else make_policy(spec, client)
    remote = isinstance(policy, RemotePolicy)

    ctrl = LQRPositionController(mass_param=spec.controller_mass, attitude_tau=spec.attitude_tau,
                                 dt=1.0 / spec.control_rate).fit()
    model = ctrl.model_
    live = LiveGains(ctrl.bundle())
    plant = PlantParams(true_mass=spec.true_mass, attitude_tau=spec.attitude_tau)
    limits = CommandLimits(plant.max_tilt, plant.thrust_min, plant.thrust_max)
    dist = build_disturbance(spec, model, live.current.gain.K)
    effects = ActionEffects.for_hover(live.current.hover.f_hover)

    control_every = int(round(1.0 / (spec.control_rate * spec.dt)))
    sample_every = int(round(1.0 / (spec.oscillation.sample_rate * spec.dt)))
    decision_every = int(round(spec.decision_period / spec.dt))
    latency_ticks = int(round(spec.decision_latency / spec.dt))
    osc = spec.oscillation
    buffer = ErrorRingBuffer(osc.buffer_size)

    state = VehicleState.at(0.0, 0.0, 0.0)
    entry_state = state
    phase = MissionPhase(Phase.IDLE, 0.0)
    adapt = AdaptiveState()
    emergency = False
    cmd = ControlCommand.disarmed(live.current.hover.f_hover)

    rows: list[TelemetryRow] = []
    conversation: list[ConversationEntry] = []
    history: list[tuple[QueryRecord, Decision]] = []
    pending: list[_Pending] = []
    last_codes = "0"
    last_latency = 0.0
    emergency_time = None
    first_dangerous = None
    transport_failures = parse_failures = consecutive_failures = 0

    pool = ThreadPoolExecutor(max_workers=1) if remote else None
    in_flight: tuple[Future, QueryRecord, int] | None = None
    wall_start = time.monotonic()

    def record(query: QueryRecord, decision: Decision, tick: int) -> None:
        conversation.append(ConversationEntry(
            query.t, query.rendered, decision.raw or render_decision(decision),
            tuple(a.value for a in decision.actions), decision.latency, decision.warnings,
        ))
        history.append((query, decision))
        pending.append(_Pending(tick, decision, len(conversation) - 1))

    def outcome_of(future: Future) -> Decision:
        nonlocal transport_failures, parse_failures, consecutive_failures
        try:
            decision = future.result()
            consecutive_failures = 0
            return decision
        except DecisionParseError as exc:
            parse_failures += 1
            logger.warning("unparseable reply, doing nothing: %s", exc)
            return Decision.do_nothing(f"parse error: {exc}")
        except LLMClientError as exc:
            transport_failures += 1
            consecutive_failures += 1
            logger.warning("transport failure %d in a row: %s", consecutive_failures, exc)
            if consecutive_failures >= MAX_TRANSPORT_FAILURES:
                return Decision((ActionName.EMERGENCY_LANDING,), "transport_failure",
                                "Decision source unreachable; landing as a precaution.")
            return Decision.do_nothing(f"transport error: {exc}")

    try:
        for k in range(spec.n_steps + 1):
            t = k * spec.dt
            if spec.pace_realtime:
                ahead = t - (time.monotonic() - wall_start)
                if ahead > 0:
                    time.sleep(ahead)

            # decisions land between control ticks
            if in_flight is not None and in_flight[0].done():
                future, query, _ = in_flight
                in_flight = None
                decision = outcome_of(future)
                record(query, decision, k)
            for p in [p for p in pending if p.apply_tick <= k]:
                pending.remove(p)
                if emergency:
                    continue
                out = apply_actions(p.decision, adapt, live.current.weights, emergency, effects)
                adapt = out.adapt
                if out.needs_resolve:
                    gain = solve_dare(model, out.weights)
                    live.swap(GainBundle(out.weights, gain, live.current.hover))
                if out.emergency and not emergency:
                    emergency = True
                    emergency_time = t
                conversation[p.entry_index] = _with_applied(conversation[p.entry_index], t)
                last_latency = p.decision.latency or (k - int(round(conversation[p.entry_index].t / spec.dt))) * spec.dt

            new_phase = fsm_step(phase, spec.plan, t, state, emergency)
            if new_phase != phase:
                logger.debug("t=%.2f phase %s -> %s", t, phase.phase.value, new_phase.phase.value)
                phase = new_phase
                entry_state = state
            ref = generate_reference(phase, spec.plan, t, entry_state)

            if k % control_every == 0:
                if phase.airborne:
                    b = live.current
                    cmd = compute_control(state, ref, b.gain, b.hover, adapt, limits)
                else:
                    cmd = ControlCommand.disarmed(live.current.hover.f_hover)

            err = tracking_error(state, ref)
            if k % sample_every == 0:
                if phase.phase in TRACKING_PHASES:
                    buffer.append(err)
                else:
                    buffer.clear()

            if k > 0 and k % decision_every == 0 and not emergency and phase.phase is not Phase.DONE:
                extra = None
                if buffer.full:
                    found = detect_oscillation(buffer.snapshot(), 1.0 / osc.sample_rate, osc.band,
                                               osc.amp_threshold)
                    if found is not None:
                        extra = render_oscillation_message(found)
                        if first_dangerous is None:
                            first_dangerous = t
                report = check_failures(state, ref, spec.thresholds, extra)
                last_codes = ";".join(str(c) for c in report.codes)
                query = QueryRecord.from_report(t, report)
                if remote:
                    if in_flight is None:
                        in_flight = (pool.submit(policy.decide, query, list(history)), query, k)
                else:
                    future: Future = Future()
                    try:
                        future.set_result(policy.decide(query, list(history)))
                    except Exception as exc:  # routed through the same failure policy
                        if not isinstance(exc, (DecisionParseError, LLMClientError)):
                            raise
                        future.set_exception(exc)
                    decision = outcome_of(future)
                    record(query, decision, k + latency_ticks)

            rows.append(TelemetryRow(
                t, *map(float, state.position_w), *map(float, ref.position_ref), *map(float, err),
                cmd.roll_cmd, cmd.pitch_cmd, cmd.thrust_delta,
                adapt.thrust_offset, adapt.roll_offset, adapt.pitch_offset,
                last_codes, phase.phase.value, last_latency,
            ))
            if k < spec.n_steps:
                state = step_plant(state, cmd, plant, dist, t, spec.dt)
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)

    metrics = compute_metrics(spec, rows, conversation, emergency_time, first_dangerous,
                              transport_failures, parse_failures)
    return RunResult(spec, rows, conversation, metrics)


def _with_applied(entry: ConversationEntry, t: float) -> ConversationEntry:
    return replace(entry, applied_at=t)
