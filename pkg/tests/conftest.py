"""Suite-wide pytest plumbing: acceptance pass/fail summary lines."""

ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    """Record one acceptance-criterion outcome for the terminal summary."""
    line = f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
