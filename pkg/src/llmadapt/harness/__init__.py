"""Experiment harness: scenarios, closed-loop runner and output files."""
from .outputs import emit_outputs
from .runner import RunMetrics, RunResult, TelemetryRow, run_experiment
from .scenarios import PRESETS, ScenarioSpec, get_scenario, load_scenario, save_scenario

__all__ = [
    "PRESETS", "RunMetrics", "RunResult", "ScenarioSpec", "TelemetryRow", "emit_outputs",
    "get_scenario", "load_scenario", "run_experiment", "save_scenario",
]
