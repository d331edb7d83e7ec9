import pytest

_LINES = []
_LOGIT_RECORDS = []


@pytest.fixture
def ac_report():
    """Record one acceptance line: ``ac_report("AC-1", ok, "detail")``."""

    def report(name, ok, detail=""):
        _LINES.append(f"{name} {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        return ok

    return report


@pytest.fixture
def logit_records():
    """Shared list of ``(label, max_abs_logit, bound)`` across acceptance runs."""
    return _LOGIT_RECORDS


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: (int(s.split()[0][3:].rstrip("ab")), s)):
            terminalreporter.write_line(line)
