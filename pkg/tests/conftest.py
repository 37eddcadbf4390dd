import numpy as np
import pytest

from floodgate.models import AdditiveLinear, Ishigami


@pytest.fixture
def ishigami_model():
    return Ishigami(7.0, 0.1)


@pytest.fixture
def linear_model():
    return AdditiveLinear([1.0, 2.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number: int, title: str, ok: bool, detail: str):
    """Store one pass/fail line for the acceptance summary; returns ``ok``."""
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
