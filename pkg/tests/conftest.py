import os
import sys
from collections import OrderedDict

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_results = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        criterion, title = marker.args
        entry = _results.setdefault(criterion, {"title": title, "checks": []})
        notes = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        entry["checks"].append((item.name, report.passed, notes))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion in sorted(_results):
        entry = _results[criterion]
        ok = all(passed for _, passed, _ in entry["checks"])
        tr.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {entry['title']}")
        for name, passed, notes in entry["checks"]:
            tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {name}" + (f"  [{notes}]" if notes else ""))
