"""Command-line entry point: ``llmadapt run --scenario mass_mismatch --out runs/mm``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .advisor import ReplayExhausted
from .controller import DareConvergenceError
from .dynamics import SimulationDivergence
from .harness.outputs import emit_outputs
from .harness.runner import run_experiment
from .harness.scenarios import PRESETS, get_scenario
from .llm_client import LLMClientError

logger = logging.getLogger("llmadapt")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llmadapt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one closed-loop experiment")
    run.add_argument("--scenario", required=True, help="preset name or path to a scenario JSON file")
    run.add_argument("--policy", help="rule | replay:<file> | remote | do_nothing")
    run.add_argument("--no-tuning-apis", action="store_true", help="drop the tuning APIs from the prompt")
    run.add_argument("--risk", choices=("normal", "strong"))
    run.add_argument("--duration", type=float)
    run.add_argument("--dt", type=float)
    run.add_argument("--decision-period", type=float)
    run.add_argument("--out", default="runs/latest")
    run.add_argument("--seed", type=int)
    run.add_argument("--plot", action="store_true", help="also write tracking.svg")
    run.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("list", help="list built-in scenarios")
    return parser


def _apply_overrides(spec, args):
    changes = {}
    if args.policy:
        changes["policy"] = args.policy
    if args.duration is not None:
        changes["duration"] = args.duration
    if args.dt is not None:
        changes["dt"] = args.dt
        changes["control_rate"] = 1.0 / args.dt
    if args.decision_period is not None:
        changes["decision_period"] = args.decision_period
    if args.seed is not None:
        changes["seed"] = args.seed
    prompt = spec.prompt
    if args.no_tuning_apis:
        prompt = dataclasses.replace(prompt, include_tuning_apis=False)
    if args.risk:
        prompt = dataclasses.replace(prompt, risk_emphasis=args.risk)
    changes["prompt"] = prompt
    if changes.get("policy") == "remote":
        changes["pace_realtime"] = True
    return spec.replace(**changes)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        for name in sorted(PRESETS):
            print(name)
        return 0

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = _apply_overrides(get_scenario(args.scenario), args)
        result = run_experiment(spec)
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulationDivergence, ReplayExhausted, LLMClientError, DareConvergenceError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    paths = emit_outputs(result, args.out, plot=args.plot)
    m = result.metrics
    print(json.dumps({
        "scenario": spec.name,
        "final_phase": m.final_phase,
        "rms_error": [m.rms_error_x, m.rms_error_y, m.rms_error_z],
        "emergency_landing_time": m.emergency_landing_time,
        "decisions": m.decisions_issued,
        "outputs": {k: str(v) for k, v in paths.items()},
    }, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
