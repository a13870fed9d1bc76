"""Collects outcomes of tests tagged ``@pytest.mark.criterion(n, title)`` and
prints one PASS/FAIL line per acceptance criterion after the run."""
from collections import OrderedDict

import pytest

_results: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        n, title = mark.args
        entry = _results.setdefault(n, {"title": title, "failed": [], "count": 0})
        entry["count"] += 1
        if not rep.passed:
            entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        e = _results[n]
        verdict = "FAIL" if e["failed"] else "PASS"
        line = f"criterion {n:2d} {verdict}: {e['title']} ({e['count'] - len(e['failed'])}/{e['count']} checks)"
        if e["failed"]:
            line += " failing: " + ", ".join(e["failed"])
        terminalreporter.write_line(line)
