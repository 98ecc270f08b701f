import pytest

CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion."""

    def record(number, title, reports):
        ok = all(r.passed for r in reports)
        CRITERIA[number] = (title, ok, [r.line() for r in reports])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, ok, lines = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}")
        for line in lines:
            terminalreporter.write_line(f"    {line}")
