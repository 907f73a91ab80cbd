import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record a one-line pass/fail result; printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA.append(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {detail}")
        print(_CRITERIA[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
