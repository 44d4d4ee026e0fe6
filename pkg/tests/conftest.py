import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record a one-line pass/fail summary for an acceptance criterion."""

    def record(number: int, ok: bool, text: str) -> bool:
        _LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_LINES):
            terminalreporter.write_line(_LINES[key])
