"""Whitelisted action APIs applied to the adaptive term, weights and mission."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import NamedTuple

from .advisor import ActionName, Decision
from .controller import AdaptiveState, CostWeights, retune

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActionEffects:
    thrust_step: float
    tilt_step: float = 0.0175
    tune_factor: float = 2.0
    thrust_limit: float = 0.0
    tilt_limit: float = 0.2

    def __post_init__(self):
        if self.thrust_step <= 0 or self.tilt_step <= 0:
            raise ValueError("action steps must be positive")
        if self.tune_factor <= 1:
            raise ValueError("tune_factor must exceed 1")
        if self.thrust_limit <= 0 or self.tilt_limit <= 0:
            raise ValueError("offset limits must be positive")

    @classmethod
    def for_hover(cls, f_hover: float, **overrides) -> "ActionEffects":
        """Defaults scaled to the controller's hover thrust: 2 % steps, 50 % limit."""
        params = {"thrust_step": 0.02 * f_hover, "thrust_limit": 0.5 * f_hover}
        params.update(overrides)
        return cls(**params)


class ActionOutcome(NamedTuple):
    adapt: AdaptiveState
    weights: CostWeights
    emergency: bool
    needs_resolve: bool


def _clamp(value: float, limit: float) -> float:
    clamped = min(max(value, -limit), limit)
    if clamped != value:
        logger.info("adaptive offset clamped from %.4f to %.4f", value, clamped)
    return clamped


# (field, sign) for offset actions. Positive pitch accelerates +x; positive
# roll accelerates -y.
_OFFSET_STEPS = {
    ActionName.INCREASE_THRUST: ("thrust_offset", +1),
    ActionName.DECREASE_THRUST: ("thrust_offset", -1),
    ActionName.ACCEL_POSITIVE_X: ("pitch_offset", +1),
    ActionName.ACCEL_NEGATIVE_X: ("pitch_offset", -1),
    ActionName.ACCEL_POSITIVE_Y: ("roll_offset", -1),
    ActionName.ACCEL_NEGATIVE_Y: ("roll_offset", +1),
}

_TUNING = {
    ActionName.TUNE_INCREASE_POSITION_PENALTY: ("Q_position", +1),
    ActionName.TUNE_DECREASE_POSITION_PENALTY: ("Q_position", -1),
    ActionName.TUNE_INCREASE_ACTUATION_COST: ("R_all", +1),
    ActionName.TUNE_DECREASE_ACTUATION_COST: ("R_all", -1),
}


def apply_actions(decision: Decision, adapt: AdaptiveState, weights: CostWeights,
                  emergency: bool, effects: ActionEffects) -> ActionOutcome:
    """Apply ``decision.actions`` in order. The emergency flag only ever latches on."""
    needs_resolve = False
    for action in decision.actions:
        if action in _OFFSET_STEPS:
            name, sign = _OFFSET_STEPS[action]
            step, limit = ((effects.thrust_step, effects.thrust_limit) if name == "thrust_offset"
                           else (effects.tilt_step, effects.tilt_limit))
            adapt = replace(adapt, **{name: _clamp(getattr(adapt, name) + sign * step, limit)})
        elif action in _TUNING:
            which, sign = _TUNING[action]
            weights = retune(weights, which, effects.tune_factor ** sign)
            needs_resolve = True
        elif action is ActionName.EMERGENCY_LANDING:
            emergency = True
    return ActionOutcome(adapt, weights, emergency, needs_resolve)
