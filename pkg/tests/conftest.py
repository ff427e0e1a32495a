import pytest

_LINES: list[str] = []


@pytest.fixture
def acceptance_lines():
    return _LINES


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: full-scale acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
