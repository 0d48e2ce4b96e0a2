"""Shared test plumbing: the acceptance-criteria result report.

Each acceptance test records exactly one pass/fail line; the hook below
replays them in the terminal summary so the verdicts survive pytest's
output capturing.
"""

import pytest

_LINES: list[str] = []


class CriteriaReport:
    def add(self, number: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture(scope="session")
def criteria() -> CriteriaReport:
    return CriteriaReport()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
