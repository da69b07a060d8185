import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""

    def record(criterion, ok, detail):
        _LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
        print(_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
