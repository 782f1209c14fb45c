"""Per-criterion PASS/FAIL summary for tests marked ``@pytest.mark.criterion(n)``."""

import pytest

_OUTCOMES: dict = {}
_DETAILS: dict = {}
_TITLES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    _TITLES[n] = marker.args[1] if len(marker.args) > 1 else ""
    if report.when == "call" or report.failed:
        # an expected failure is still a failed criterion; an unexpected pass counts
        _OUTCOMES.setdefault(n, []).append(report.passed)
    if report.when == "call":
        for key, value in item.user_properties:
            if key == "detail":
                _DETAILS.setdefault(n, []).append(str(value))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status = "PASS" if all(_OUTCOMES[n]) else "FAIL"
        line = f"criterion {n:>2}: {status}  {_TITLES.get(n, '')}"
        details = _DETAILS.get(n)
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
