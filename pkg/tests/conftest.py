from __future__ import annotations

import pytest


_criteria: dict[str, tuple[int, str]] = {}
_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(items: list[pytest.Item]) -> None:
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[item.nodeid] = (int(mark.args[0]), str(mark.args[1]))


def pytest_runtest_logreport(report: pytest.TestReport) -> None:
    if report.nodeid not in _criteria:
        return
    number, _ = _criteria[report.nodeid]
    if report.when == "call" or report.failed:
        _outcomes.setdefault(number, []).append(report.passed)


def pytest_terminal_summary(terminalreporter) -> None:
    if not _criteria:
        return
    titles = {n: t for n, t in _criteria.values()}
    terminalreporter.section("acceptance criteria")
    for number in sorted(titles):
        results = _outcomes.get(number)
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status:7s} {titles[number]}")

