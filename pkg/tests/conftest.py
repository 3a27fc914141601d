import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = []


def record(criterion, passed, detail):
    """Store one acceptance line; printed at the end of the session."""
    line = "%s %s: %s" % ("PASS" if passed else "FAIL", criterion, detail)
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
