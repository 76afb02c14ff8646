import math
import os

import numpy as np
import pytest

from drivestack.hdmap import MapModel, ReferenceLine

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: list[str] = []


def straight_map(length=200.0, lanes=2, width=3.5):
    return MapModel(ReferenceLine.resampled([(0.0, 0.0), (length, 0.0)]), lane_width=width, lane_count=lanes)


def arc_map(radius=60.0, sweep=math.pi / 2, lanes=2, width=3.5):
    th = np.linspace(0.0, sweep, 400)
    pts = np.column_stack([radius * np.sin(th), radius * (1 - np.cos(th))])
    return MapModel(ReferenceLine.resampled(pts), lane_width=width, lane_count=lanes)


def s_curve_map(length=240.0, amp=8.0, lanes=2, width=3.5):
    x = np.linspace(0.0, length, 600)
    y = amp * np.sin(2 * math.pi * x / length)
    return MapModel(ReferenceLine.resampled(np.column_stack([x, y])), lane_width=width, lane_count=lanes)


@pytest.fixture(scope="session")
def maps():
    return {"straight": straight_map(), "arc": arc_map(), "s_curve": s_curve_map()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def backend_name():
    return os.environ.get("DRIVESTACK_PURE_PYTHON", "0")


class ScenarioRuns:
    """Runs each bundled scenario at most once per session."""

    def __init__(self, tmp):
        self.tmp = tmp
        self._cache = {}

    def get(self, name):
        if name not in self._cache:
            import json

            from drivestack.scenario import bundled_scenario, load_scenario, run

            path = self.tmp / f"{name}.jsonl"
            result = run(load_scenario(bundled_scenario(name)), trace_out=path)
            with open(path, encoding="utf-8") as fh:
                records = [json.loads(line) for line in fh]
            self._cache[name] = (result, records)
        return self._cache[name]


@pytest.fixture(scope="session")
def scenario_runs(tmp_path_factory):
    return ScenarioRuns(tmp_path_factory.mktemp("runs"))
