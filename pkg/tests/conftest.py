import re

_outcomes: dict[int, tuple[str, float]] = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::\w+::test_criterion_(\d+)_", report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        previous = _outcomes.get(number)
        if previous is None or status == "FAIL":
            _outcomes[number] = (status, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, duration = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {CRITERIA[number]}  [{duration:.1f} s]")
