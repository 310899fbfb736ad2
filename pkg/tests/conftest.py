"""Shared pytest wiring: surface acceptance verdict lines in the summary.

The acceptance tests record one line per criterion; printing them from the
terminal-summary hook keeps them visible even when output capture is on.
"""

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
