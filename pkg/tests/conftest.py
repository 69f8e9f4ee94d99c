import pytest

RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """Record one acceptance line: ``report(n, ok, detail)`` then assert on ``ok``."""

    def _report(number: int, ok: bool, detail: str) -> None:
        RESULTS[number] = (bool(ok), detail)
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")

    return _report


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
