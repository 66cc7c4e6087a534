"""Shared fixtures: the acceptance suite reports one line per criterion, repeated
in the terminal summary so the lines survive output capture."""

import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    def emit(label: str, passed: bool, detail: str) -> None:
        line = f"CRITERION {label:4s} {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
