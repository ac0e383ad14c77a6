import time
from functools import lru_cache

import pytest

from crosschain.config import load_preset, scenario_from_config
from crosschain.sim import simulate

ACCEPTANCE_LINES: list[str] = []


@lru_cache(maxsize=None)
def preset_world(name: str):
    """Run a bundled preset once per session; returns (world, scenario, seconds)."""
    scenario = scenario_from_config(load_preset(name))
    t0 = time.perf_counter()
    world = simulate(scenario)
    return world, scenario, time.perf_counter() - t0


@pytest.fixture
def run_preset():
    return preset_world


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
