import pytest

from capnet.geometry import CapacitorSpec, GridSpec

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, name): acceptance criterion this test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when == "teardown":
        return
    if report.when == "setup" and not report.failed:
        return
    number, name = marker.args
    entry = _criteria.setdefault(number, {"name": name, "passed": 0, "failed": []})
    if report.passed:
        entry["passed"] += 1
    else:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "FAIL" if e["failed"] else "PASS"
        detail = f" ({', '.join(e['failed'])})" if e["failed"] else ""
        terminalreporter.write_line(f"criterion {number}: {status} {e['name']}{detail}")


@pytest.fixture
def spec():
    return CapacitorSpec(d=0.5)


@pytest.fixture
def grid9():
    return GridSpec(9, 9)
