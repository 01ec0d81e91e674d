import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, text = mark.args
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA[number] = (text, report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, passed, detail = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d} {status}: {text}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
