import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record ``(n, ok, detail)`` so the run ends with one line per exit criterion."""

    def record(n, ok, detail):
        _CRITERIA[n] = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[n])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
