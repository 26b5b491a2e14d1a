import numpy as np
import pytest

from objsupp.envs import HazardGridConfig, grid_to_cmdp


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Record one ``[PASS]/[FAIL] criterion N: ...`` line, printed now and in the terminal summary."""

    def emit(number: int, ok: bool, message: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {message}"
        print(line)
        request.config._acceptance_lines.append(line)
        return ok

    return emit


@pytest.fixture
def grid3():
    return HazardGridConfig(3, 3, goal_cell=(2, 0), hazard_cells=((1, 0),), pit_cells=((2, 2),), slip_prob=0.1,
                            start_cell=(0, 0), max_steps=30)


@pytest.fixture
def spec3(grid3):
    return grid_to_cmdp(grid3, 0.95, (0.9, 0.9), (1.0, 1.0), 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
