"""Shared fixtures: the acceptance-criteria recorder.

Acceptance tests register one (number, verdict, detail) entry each; a
terminal-summary hook prints them as one line per criterion at the end of
the run, so the verdicts stay visible even with output capture active.
"""

import pytest

_criteria: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def _record(number: int, ok: bool, detail: str) -> None:
        _criteria[number] = (ok, detail)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, detail = _criteria[number]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
