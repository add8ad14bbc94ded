import pytest

_results = {}
_setup_time = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "setup":
        _setup_time[item.nodeid] = report.duration
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        secs = report.duration + (_setup_time.get(item.nodeid, 0.0) if report.when == "call" else 0.0)
        _results[mark.args[0]] = (mark.args[1], report.outcome, detail, secs)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, outcome, detail, secs = _results[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] criterion {number:>2}: {title} ({secs:.1f}s)"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
