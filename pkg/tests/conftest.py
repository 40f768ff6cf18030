"""Shared test plumbing.

The acceptance tests report one PASS/FAIL line per criterion; the terminal
summary hook replays those lines after the run so they are visible without -s.
"""

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def report(num, name, ok, detail=""):
        line = f"criterion {num:2d}  {name:<30s} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
