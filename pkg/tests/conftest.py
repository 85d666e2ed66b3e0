"""Suite-wide fixtures and the acceptance result banner."""

from __future__ import annotations

import pytest

_ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion_report():
    """Record one acceptance criterion outcome for the final banner."""

    def record(number: int, name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE_RESULTS.append((number, name, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {number} {verdict} - {name}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
