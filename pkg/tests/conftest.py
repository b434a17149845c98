import pytest

ACCEPTANCE_RESULTS = []


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an acceptance criterion; returns the verdict."""

    def record(number: int, ok: bool, detail: str = "") -> bool:
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_RESULTS.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
