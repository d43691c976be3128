import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion.

    Usage: ``acceptance(n, ok, detail)``; returns ``ok`` so the caller can
    assert on it.
    """

    def report(n: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[n] = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
