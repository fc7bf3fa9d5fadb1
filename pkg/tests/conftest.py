import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Store one acceptance verdict; the summary prints it even if the test then fails."""

    def _record(criterion: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[criterion] = (bool(passed), detail)
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
