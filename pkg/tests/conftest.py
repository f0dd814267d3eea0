import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def report(request):
    """Record one acceptance verdict; the summary prints one line per criterion."""
    def _report(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        request.config.stash[_RESULTS].append(line)
        print(line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
            terminalreporter.write_line(line)
