import numpy as np
import pytest

_CRITERIA = {}


def record(number, name, passed, detail=""):
    """Store one acceptance outcome for the end-of-run summary."""
    _CRITERIA[number] = (name, bool(passed), detail)
    print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {name} {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        name, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {name}: {detail}")
