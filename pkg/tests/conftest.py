import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(k, passed, detail, seconds)``."""

    def record(k: int, passed: bool, detail: str, seconds: float) -> None:
        line = f"CRITERION {k:2d}: {'PASS' if passed else 'FAIL'} ({seconds:.2f} s) {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
