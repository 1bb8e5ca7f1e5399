"""One pass/fail line per acceptance criterion at the end of the run."""

from collections import defaultdict

import pytest

_outcomes = defaultdict(list)
_titles = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion this test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _titles[m.args[0]] = m.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[m.args[0]].append((item.name, report.passed, report.skipped))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_titles):
        results = _outcomes.get(n, [])
        if not results:
            status = "NOT RUN"
        elif all(ok for _, ok, _ in results):
            status = "PASS"
        else:
            status = "FAIL"
        failed = [name for name, ok, skipped in results if not ok and not skipped]
        tail = f"  (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n} [{status}] {_titles[n]}{tail}")
