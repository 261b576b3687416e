import numpy as np
import pytest

SEED = 20240917
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def report():
    """Record a one-line acceptance verdict (also echoed in the terminal summary)."""

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
