import pytest

_RESULTS = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)``; the summary prints one line per criterion."""

    def record(criterion, passed, detail=""):
        prev = _RESULTS.get(criterion)
        if prev is not None:
            passed = passed and prev[0]
            detail = f"{prev[1]}; {detail}" if detail else prev[1]
        _RESULTS[criterion] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS):
        passed, detail = _RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
