"""Prompt construction, query/response text protocol, and decision policies."""
from __future__ import annotations

import enum
import json
import logging
import re
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol, Sequence

from .monitor import FailureReport, OscillationReport

logger = logging.getLogger(__name__)

OUTPUT_VARIABLE = "list_of_function_names_to_be_executed_right_now"


class ActionName(str, enum.Enum):
    INCREASE_THRUST = "increase_thrust"
    DECREASE_THRUST = "decrease_thrust"
    ACCEL_POSITIVE_X = "accel_positive_x"
    ACCEL_NEGATIVE_X = "accel_negative_x"
    ACCEL_POSITIVE_Y = "accel_positive_y"
    ACCEL_NEGATIVE_Y = "accel_negative_y"
    EMERGENCY_LANDING = "emergency_landing"
    DO_NOTHING = "do_nothing"
    TUNE_DECREASE_ACTUATION_COST = "tune_controller_by_decreasing_the_cost_of_actuation_usage"
    TUNE_INCREASE_ACTUATION_COST = "tune_controller_by_increasing_the_cost_of_actuation_usage"
    TUNE_INCREASE_POSITION_PENALTY = "tune_controller_by_increasing_penalty_on_position_errors"
    TUNE_DECREASE_POSITION_PENALTY = "tune_controller_by_decreasing_penalty_on_position_errors"

    def __str__(self) -> str:
        return self.value


CONTROL_ACTIONS = (
    ActionName.INCREASE_THRUST, ActionName.DECREASE_THRUST,
    ActionName.ACCEL_POSITIVE_X, ActionName.ACCEL_NEGATIVE_X,
    ActionName.ACCEL_POSITIVE_Y, ActionName.ACCEL_NEGATIVE_Y,
)
MISSION_ACTIONS = (ActionName.EMERGENCY_LANDING, ActionName.DO_NOTHING)
TUNING_ACTIONS = (
    ActionName.TUNE_DECREASE_ACTUATION_COST, ActionName.TUNE_INCREASE_ACTUATION_COST,
    ActionName.TUNE_INCREASE_POSITION_PENALTY, ActionName.TUNE_DECREASE_POSITION_PENALTY,
)


@dataclass(frozen=True)
class PromptConfig:
    include_tuning_apis: bool = True
    risk_emphasis: str = "normal"
    platform: str = "multirotor"

    def __post_init__(self):
        if self.risk_emphasis not in ("normal", "strong"):
            raise ValueError(f"risk_emphasis must be 'normal' or 'strong', got {self.risk_emphasis!r}")

    @property
    def valid_actions(self) -> frozenset[ActionName]:
        actions = set(CONTROL_ACTIONS) | set(MISSION_ACTIONS)
        if self.include_tuning_apis:
            actions |= set(TUNING_ACTIONS)
        return frozenset(actions)


def build_initial_prompt(config: PromptConfig = PromptConfig()) -> str:
    must = "MUST" if config.risk_emphasis == "strong" else "must"
    api_lines = [
        "# possible failure mitigation strategies",
        "from controller import (",
        "  # modify control input",
        "  " + ", ".join(a.value for a in CONTROL_ACTIONS) + ",",
        "  # Mission-level decisions",
        "  " + ", ".join(a.value for a in MISSION_ACTIONS) + ",",
    ]
    if config.include_tuning_apis:
        api_lines.append("  # Controller tuning -- we use a LQR")
        api_lines.extend(f"  {a.value}," for a in TUNING_ACTIONS)
    api_lines.append(")")

    parts = [
        f"# Inside the codebase of my {config.platform} I found the following python code:",
        "\n".join([
            "# list of possible issues/failures in mission planner/controller:",
            "NO_ISSUE = 0",
            "FLYING_TOO_HIGH = 3",
            "FLYING_TOO_LOW= 4",
            "FLYING_TOO_LARGE_POSITIVE_POSITION_ERROR_X = 7",
            "FLYING_TOO_LARGE_NEGATIVE_POSITION_ERROR_X = 8",
            "FLYING_TOO_LARGE_POSITIVE_POSITION_ERROR_Y = 5",
            "FLYING_TOO_LARGE_NEGATIVE_POSITION_ERROR_Y = 6",
        ]),
        "\n".join([
            "# check current failure using check_failure. outputs a list of possible failures, for example [2, 3],",
            "# and a string with additional information. The string may be empty.",
            "# Example current_failure: ([2, 3], 'position error = [0.1, -0.1, 1.5]')",
            "current_failures = check_failures()",
        ]),
        "\n".join(api_lines),
        "\n".join([
            "From now on, I provide you with the value of the variable “current_failure”,",
            "and your output needs to be your best guess of the function names in the python list",
            f'"{OUTPUT_VARIABLE}".',
            'For instance, your output: ["emergency_landing"],"low_battery_voltage",',
            '"because the drone can hardly move it is safer to land"',
            "Try to think like a drone control engineer.",
        ]),
        "\n".join([
            "DO NOT output function names to be called in the future, but account for past problems to come up",
            f'with your guess of the functions in "{OUTPUT_VARIABLE}".',
        ]),
        "\n".join([
            "If problems persist, do not hesitate to emergency land.",
            f"if your actions do not take the desired effect, you {must} perform an emergency landing.",
        ]),
    ]
    return "\n\n".join(parts) + "\n"


def format_query(report: FailureReport) -> str:
    codes = ", ".join(str(c) for c in report.codes)
    return f"([{codes}], '{report.info}')"


def render_oscillation_message(report: OscillationReport) -> str:
    return (f"VERY DANGEROUS oscillations on {report.axis}-axis. "
            f"Frequency is {report.frequency:.2f} [Hz], amplitude is {report.amplitude:.2f} [m].")


@dataclass(frozen=True)
class QueryRecord:
    t: float
    report: FailureReport
    rendered: str

    @classmethod
    def from_report(cls, t: float, report: FailureReport) -> "QueryRecord":
        return cls(t, report, format_query(report))


@dataclass(frozen=True)
class Decision:
    actions: tuple[ActionName, ...]
    short_label: str = ""
    explanation: str = ""
    raw: str = ""
    latency: float = 0.0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        actions = tuple(ActionName(a) for a in self.actions)
        if not actions:
            raise ValueError("a decision needs at least one action")
        if len(set(actions)) != len(actions):
            raise ValueError(f"duplicate actions in {actions}")
        object.__setattr__(self, "actions", actions)

    @classmethod
    def do_nothing(cls, reason: str = "") -> "Decision":
        return cls((ActionName.DO_NOTHING,), explanation=reason)


class DecisionParseError(ValueError):
    """The reply contained no usable action list."""


_LIST_RE = re.compile(r"\[([^\[\]]*)\]", re.S)
_QUOTED_RE = re.compile(r"\"([^\"]*)\"|'([^']*)'", re.S)


def parse_decision(raw: str, valid: Sequence[ActionName] | frozenset | None = None) -> Decision:
    """Extract the first bracketed list of quoted names from a model reply.

    Whitespace inside a quoted name is dropped (replies wrap long names).
    Unknown names are discarded and noted in ``Decision.warnings``.
    """
    valid_names = {ActionName(a).value for a in (valid if valid is not None else ActionName)}
    for match in _LIST_RE.finditer(raw):
        items = [a or b for a, b in _QUOTED_RE.findall(match.group(1))]
        if items:
            break
    else:
        raise DecisionParseError(f"no bracketed list of quoted names in reply: {raw[:80]!r}")

    actions: list[ActionName] = []
    warnings: list[str] = []
    for item in items:
        name = re.sub(r"\s+", "", item)
        if name not in valid_names:
            warnings.append(f"dropped unknown action {name!r}")
        elif ActionName(name) not in actions:
            actions.append(ActionName(name))
    if not actions:
        raise DecisionParseError(f"no valid action in {items}")

    rest = raw[match.end():].lstrip(" \t\r\n,")
    label = ""
    m = re.match(r"\"([^\"]*)\"|'([^']*)'", rest)
    if m:
        label = re.sub(r"\s+", "", m.group(1) if m.group(1) is not None else m.group(2))
        rest = rest[m.end():].lstrip(" \t\r\n,")
    explanation = " ".join(rest.split())
    if len(explanation) >= 2 and explanation[0] == explanation[-1] and explanation[0] in "\"'":
        explanation = explanation[1:-1]
    for w in warnings:
        logger.warning(w)
    return Decision(tuple(actions), label, explanation, raw, warnings=tuple(warnings))


def render_decision(decision: Decision) -> str:
    """Reply text in the requested output style, parseable by :func:`parse_decision`."""
    names = ", ".join(f'"{a.value}"' for a in decision.actions)
    return f'{OUTPUT_VARIABLE}: [{names}], "{decision.short_label}", "{decision.explanation}"'


class DecisionPolicy(Protocol):
    def decide(self, query: QueryRecord, history: Sequence[tuple[QueryRecord, Decision]]) -> Decision:
        ...


def policy_decide(policy: DecisionPolicy, query: QueryRecord,
                  history: Sequence[tuple[QueryRecord, Decision]] = ()) -> Decision:
    return policy.decide(query, history)


_CODE_ACTION = {
    3: ActionName.DECREASE_THRUST,
    4: ActionName.INCREASE_THRUST,
    5: ActionName.ACCEL_NEGATIVE_Y,
    6: ActionName.ACCEL_POSITIVE_Y,
    7: ActionName.ACCEL_NEGATIVE_X,
    8: ActionName.ACCEL_POSITIVE_X,
}
_CODE_LABEL = {
    0: "no_issue",
    3: "flying_too_high",
    4: "flying_too_low",
    5: "positive_y_position_error",
    6: "negative_y_position_error",
    7: "positive_x_position_error",
    8: "negative_x_position_error",
}


def _with_raw(decision: Decision) -> Decision:
    return replace(decision, raw=render_decision(decision))


class RuleBasedPolicy:
    """Deterministic stand-in for the language model.

    Each failure code maps to the action that pushes the error back. When a
    code has been present for ``persistence`` consecutive queries (the current
    one included) and tuning is allowed, the position penalty is raised once
    for that streak.
    """

    def __init__(self, include_tuning_apis: bool = True, persistence: int = 3):
        self.include_tuning_apis = include_tuning_apis
        self.persistence = persistence

    def decide(self, query, history=()):
        return _with_raw(self._decide(query, history))

    def _decide(self, query, history):
        report = query.report
        if "DANGEROUS" in report.info:
            return Decision((ActionName.EMERGENCY_LANDING,), "dangerous_condition",
                            "The log reports a dangerous condition; landing now is the safe choice.")
        if report.ok:
            return Decision((ActionName.DO_NOTHING,), "no_issue",
                            "No issue is reported, so no corrective action is needed.")

        actions = [_CODE_ACTION[c] for c in report.codes if c in _CODE_ACTION]
        if not actions:
            return Decision((ActionName.DO_NOTHING,), "unknown_issue", "Unrecognized failure codes.")
        if self.include_tuning_apis and any(
            self._streak(c, query, history) == self.persistence for c in report.codes
        ):
            actions.append(ActionName.TUNE_INCREASE_POSITION_PENALTY)
        label = "_and_".join(_CODE_LABEL.get(c, str(c)) for c in report.codes)
        return Decision(tuple(actions), label,
                        "Counteract the reported position errors with the matching corrections.")

    @staticmethod
    def _streak(code: int, query, history) -> int:
        n = 1
        for past, _ in reversed(history):
            if code not in past.report.codes:
                break
            n += 1
        return n


class ReplayExhausted(RuntimeError):
    """The recorded transcript has no more responses."""


def load_transcript_responses(path) -> list[str]:
    """Responses from a conversation record file.

    Accepts the line-delimited JSON record (``response`` field) or the plain
    text log (``t = ...s: Response ...`` entries, continuation lines joined).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        return [json.loads(line)["response"] for line in text.splitlines() if line.strip()]
    responses: list[str] = []
    current: list[str] | None = None
    entry = re.compile(r"^t = [-\d.]+s: (Prompt|Response) ?(.*)$")
    for line in text.splitlines():
        m = entry.match(line)
        if m:
            if current is not None:
                responses.append("\n".join(current))
            current = [m.group(2)] if m.group(1) == "Response" else None
        elif current is not None:
            current.append(line)
    if current is not None:
        responses.append("\n".join(current))
    return responses


class ReplayPolicy:
    """Returns recorded responses in order, parsed against the active whitelist."""

    def __init__(self, responses: Sequence[str], valid=None):
        self.responses = list(responses)
        self.valid = valid
        self._next = 0

    @classmethod
    def from_file(cls, path, valid=None) -> "ReplayPolicy":
        return cls(load_transcript_responses(path), valid)

    def decide(self, query, history=()):
        if self._next >= len(self.responses):
            raise ReplayExhausted(f"transcript exhausted after {len(self.responses)} responses")
        raw = self.responses[self._next]
        self._next += 1
        return parse_decision(raw, self.valid)


class RemotePolicy:
    """Queries a chat-completion model with the initial prompt plus history.

    Oldest query/response pairs are evicted once the estimated size exceeds
    ``token_budget`` (about four characters per token); the initial prompt is
    always kept.
    """

    def __init__(self, client, prompt_config: PromptConfig = PromptConfig(), token_budget: int = 6000):
        self.client = client
        self.prompt_config = prompt_config
        self.token_budget = token_budget
        self.initial_prompt = build_initial_prompt(prompt_config)

    def messages(self, query, history=()) -> list[dict]:
        pairs = [
            [{"role": "user", "content": q.rendered}, {"role": "assistant", "content": d.raw or render_decision(d)}]
            for q, d in history
        ]
        head = [{"role": "user", "content": self.initial_prompt}]
        tail = [{"role": "user", "content": query.rendered}]

        def size(msgs):
            return sum(len(m["content"]) for m in msgs) // 4

        while pairs and size(head + [m for p in pairs for m in p] + tail) > self.token_budget:
            pairs.pop(0)
        return head + [m for p in pairs for m in p] + tail

    def decide(self, query, history=()):
        start = time.monotonic()
        raw = self.client.complete(self.messages(query, history))
        latency = time.monotonic() - start
        d = parse_decision(raw, self.prompt_config.valid_actions)
        return Decision(d.actions, d.short_label, d.explanation, raw, latency, d.warnings)


def conversation_lines(t: float, query: QueryRecord, decision_raw: str) -> list[str]:
    return [f"t = {t:.2f}s: Prompt {query.rendered}", f"t = {t:.2f}s: Response {decision_raw}"]
