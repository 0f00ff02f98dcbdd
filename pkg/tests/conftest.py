import pytest

_ACCEPTANCE = {}


class _Recorder:
    def __call__(self, number: int, passed: bool, detail: str = ""):
        _ACCEPTANCE[number] = (bool(passed), detail)
        return bool(passed)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
