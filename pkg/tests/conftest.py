"""Shared pytest hooks: visible per-criterion summary for the acceptance suite."""

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _acceptance_results[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_acceptance_results):
        outcome = _acceptance_results[name]
        word = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{word}  {name}")
