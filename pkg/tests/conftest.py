"""Collects acceptance results and prints one line per criterion at the end."""

ACCEPTANCE_RESULTS = []


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    ACCEPTANCE_RESULTS.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(line)
