import re

import pytest

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    k = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[k] = ("PASS" if report.passed else "FAIL", m.group(2).replace("_", " "))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        verdict, name = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}  {verdict}  {name}")


@pytest.fixture
def rng():
    return __import__("numpy").random.default_rng(20240611)
