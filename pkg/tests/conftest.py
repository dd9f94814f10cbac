import numpy as np
import pytest

from bregconceal.datasets import make_texture


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def texture64():
    return make_texture((64, 64), sigma=4.0, seed=3)


def shifted_pair(canvas, shape, motion, pad=8):
    """``(prev, curr)`` crops with ``curr(r) = prev(r - motion)``, integer motion."""
    dh, dv = motion
    h, w = shape
    prev = canvas[pad : pad + h, pad : pad + w]
    curr = canvas[pad - dv : pad - dv + h, pad - dh : pad - dh + w]
    return prev, curr


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    """Log one acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
