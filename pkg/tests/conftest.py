import pytest

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    def _report(number: int, title: str, passed: bool, detail: str, elapsed: float):
        line = f"{'PASS' if passed else 'FAIL'} {number}: {title} ({detail}; {elapsed:.2f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report
