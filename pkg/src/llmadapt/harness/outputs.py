"""Telemetry CSV, conversation logs, metrics and optional SVG plots."""
from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

from .runner import RunResult, TelemetryRow
from .scenarios import scenario_to_dict

TELEMETRY_FIELDS = [f.name for f in dataclasses.fields(TelemetryRow)]


def conversation_log_text(result: RunResult) -> str:
    lines = []
    for entry in result.conversation:
        lines.append(f"t = {entry.t:.2f}s: Prompt {entry.prompt}")
        lines.append(f"t = {entry.t:.2f}s: Response {entry.response}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_telemetry(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TELEMETRY_FIELDS)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in dataclasses.astuple(row)])


def write_conversation_records(result: RunResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in result.conversation:
            fh.write(json.dumps(dataclasses.asdict(entry), ensure_ascii=False) + "\n")


def plot_tracking(result: RunResult, path) -> None:
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    rows = result.telemetry
    t = [r.t for r in rows]
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for ax, axis in zip(axes, "xyz"):
        ax.plot(t, [getattr(r, f"pos_{axis}") for r in rows], label="position")
        ax.plot(t, [getattr(r, f"ref_{axis}") for r in rows], "--", label="reference")
        ax.set_ylabel(f"{axis} [m]")
        for entry in result.conversation:
            if "emergency_landing" in entry.actions:
                ax.axvline(entry.t, color="r", alpha=0.5)
    axes[0].legend(loc="upper right")
    axes[0].set_title(result.spec.name)
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(result: RunResult, out_dir, plot: bool = False) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "telemetry": out / "telemetry.csv",
        "conversation_log": out / "conversation.log",
        "conversation_records": out / "conversation.jsonl",
        "metrics": out / "metrics.json",
        "scenario": out / "scenario.json",
    }
    write_telemetry(result.telemetry, paths["telemetry"])
    paths["conversation_log"].write_text(conversation_log_text(result), encoding="utf-8")
    write_conversation_records(result, paths["conversation_records"])
    paths["metrics"].write_text(json.dumps(result.metrics.as_dict(), indent=2) + "\n", encoding="utf-8")
    paths["scenario"].write_text(json.dumps(scenario_to_dict(result.spec), indent=2) + "\n", encoding="utf-8")
    if plot:
        paths["plot"] = out / "tracking.svg"
        plot_tracking(result, paths["plot"])
    return paths
