import pytest

_VERDICTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): release acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if report.when == "call" or failed:
        prev = _VERDICTS.get(number)
        verdict = "FAIL" if failed or (prev and prev[0] == "FAIL") else "PASS"
        observed = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _VERDICTS[number] = (verdict, title, observed)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        verdict, title, observed = _VERDICTS[number]
        line = f"{verdict} criterion {number:>2}: {title}"
        if observed:
            line += f" [{observed}]"
        terminalreporter.write_line(line)
