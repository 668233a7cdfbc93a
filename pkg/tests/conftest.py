import pytest

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the end-of-run acceptance summary."""
    def record(number, passed, detail):
        _ACCEPTANCE.append((number, passed, detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
