"""Command-line entry point: run, validate and replay scenarios."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .scenario import (
    EXIT_ERROR,
    EXIT_FAIL,
    EXIT_PASS,
    InternalError,
    ScenarioError,
    bundled_scenario,
    evaluate,
    load_scenario,
    read_trace,
    run,
)


def _resolve(path: str) -> str:
    # bare names refer to bundled scenarios
    if not Path(path).exists() and "/" not in path and not path.endswith(".json"):
        return str(bundled_scenario(path))
    return path


def _cmd_run(args) -> int:
    spec = load_scenario(_resolve(args.scenario))
    result = run(spec, trace_out=args.trace_out, seed=args.seed, duration_override=args.duration_override)
    v = result.verdict
    print(f"scenario {spec.name}: {result.ticks} ticks, ended by {result.terminated_by}")
    if args.print_verdict:
        print(json.dumps({
            "passed": v.passed,
            "failures": [{"criterion": f.criterion, "tick": f.tick, "detail": f.detail} for f in v.failures],
            "metrics": v.metrics,
        }, indent=2))
    else:
        print(v.summary())
    if result.trace_path is not None:
        print(f"trace written to {result.trace_path}")
    return result.exit_code


def _cmd_validate(args) -> int:
    spec = load_scenario(_resolve(args.scenario))
    print(
        f"{spec.name}: ok ({spec.map.lane_count} lanes, {len(spec.obstacles)} obstacles, "
        f"{spec.duration_s:g} s)"
    )
    return EXIT_PASS


def _cmd_replay(args) -> int:
    spec = load_scenario(_resolve(args.check))
    verdict = evaluate(read_trace(args.trace), spec.criteria)
    print(verdict.summary())
    return EXIT_PASS if verdict.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drivestack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and evaluate its pass criteria")
    p.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
    p.add_argument("--trace-out", metavar="PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--duration-override", type=float, metavar="S")
    p.add_argument("--print-verdict", action="store_true", help="print the verdict as JSON")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="load and validate a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("replay", help="re-evaluate pass criteria on a recorded trace")
    p.add_argument("trace")
    p.add_argument("--check", required=True, metavar="SCENARIO")
    p.set_defaults(func=_cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (InternalError, ValueError, OSError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
