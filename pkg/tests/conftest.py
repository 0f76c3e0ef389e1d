"""Shared hooks: one summary line per acceptance criterion."""
import re

_CRITERION = re.compile(r"test_criterion_(\d+)")
DETAILS: dict[int, str] = {}
_OUTCOMES: dict[int, bool] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or not report.passed:
        _OUTCOMES[n] = _OUTCOMES.get(n, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status = "PASS" if _OUTCOMES[n] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {n}: {DETAILS.get(n, '')}".rstrip())
