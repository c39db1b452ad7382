from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lp_sampler.randomness import RandomTape

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class ScriptedTape(RandomTape):
    """Tape whose exponentials come from a fixed script, in order."""

    def __init__(self, exponentials) -> None:
        super().__init__(0)
        self.script = list(exponentials)

    def exponentials(self, path, size):
        out, self.script = self.script[:size], self.script[size:]
        if len(out) < size:
            raise LookupError("script exhausted")
        return np.asarray(out, dtype=np.float64)


@pytest.fixture
def scripted_tape():
    return ScriptedTape


@pytest.fixture
def tape():
    return RandomTape(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
