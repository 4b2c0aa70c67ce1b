"""Repeat acceptance verdict lines in the terminal summary.

The lines are printed inside the tests, so without ``-s`` pytest captures
them; collecting them here keeps them visible in a plain ``pytest -v`` run.
"""

_VERDICTS: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _VERDICTS.extend(l for l in report.capstdout.splitlines() if l.startswith("CRITERION "))


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
