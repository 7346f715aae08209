"""Prints one PASS/FAIL/SKIP line per acceptance criterion after the run."""

import re

_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        m = re.search(r"test_criterion_(\d+)", report.nodeid)
        label = f"criterion {m.group(1)}" if m else report.nodeid.split("::")[-1]
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        detail = dict(report.user_properties).get("detail", "")
        if report.outcome == "skipped" and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2].removeprefix("Skipped: ")
        _results[report.nodeid] = (label, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in sorted(_results.values(), key=lambda r: r[0]):
        terminalreporter.write_line(f"{label}: {status}  {detail}".rstrip())
