from __future__ import annotations

import pytest

from reverting import RandomStream

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return RandomStream(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
