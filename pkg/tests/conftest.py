import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance pass/fail lines at the end of the run.

    Captured stdout of passing tests is normally swallowed; the acceptance
    criteria must surface their one-line verdicts regardless, so the module
    records them and this hook prints the collected table.
    """
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", []) if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
