import pytest

VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(VERDICTS, [])

    def _verdict(number: int, checks: dict, detail: str):
        ok = all(checks.values())
        failed = [name for name, good in checks.items() if not good]
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        if failed:
            line += f" [failed: {', '.join(failed)}]"
        lines.append(line)
        print(line)
        assert ok, line

    return _verdict


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
