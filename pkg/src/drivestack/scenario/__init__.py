"""Scenario loading, closed-loop execution and verdicts."""
from .runner import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, InternalError, RunResult, run
from .spec import (
    ParseError,
    PassCriteria,
    ScenarioError,
    ScenarioSpec,
    ValidationError,
    bundled_scenario,
    load_scenario,
    parse_scenario,
)
from .verdict import Failure, Verdict, evaluate, mode_timeline, read_trace

__all__ = [
    "EXIT_ERROR", "EXIT_FAIL", "EXIT_PASS", "InternalError", "RunResult", "run",
    "ParseError", "PassCriteria", "ScenarioError", "ScenarioSpec", "ValidationError",
    "bundled_scenario", "load_scenario", "parse_scenario",
    "Failure", "Verdict", "evaluate", "mode_timeline", "read_trace",
]
