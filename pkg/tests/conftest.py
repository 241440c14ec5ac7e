import pytest

CRITERIA: dict[str, str] = {}


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def record(name: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        CRITERIA[name] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for name in sorted(CRITERIA, key=lambda s: int(s.split(".")[0]) if s[0].isdigit() else 99):
            terminalreporter.write_line(CRITERIA[name])
