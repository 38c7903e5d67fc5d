import inspect

_CRITERIA = {}  # nodeid -> (label, outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        if item.module.__name__.endswith("test_acceptance") and item.name.startswith("test_ac"):
            doc = inspect.getdoc(item.function) or item.name
            _CRITERIA[item.nodeid] = [doc.splitlines()[0], "NOT RUN"]


def pytest_runtest_logreport(report):
    entry = _CRITERIA.get(report.nodeid)
    if entry is None:
        return
    if report.failed:
        entry[1] = "FAIL"
    elif report.when == "call" and report.passed and entry[1] != "FAIL":
        entry[1] = "PASS"
    elif report.skipped:
        entry[1] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _CRITERIA.values():
        terminalreporter.write_line(f"{outcome:4} {label}")
