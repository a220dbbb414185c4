import numpy as np
import pytest

from logitval import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_data(rng, n=40, p=3, beta=None, names=None):
    """Random logistic data; redraws until both classes are present."""
    beta = np.r_[-0.3, np.linspace(0.8, -0.6, p)] if beta is None else np.asarray(beta)
    while True:
        X = rng.normal(size=(n, p))
        y = (rng.random(n) < 1 / (1 + np.exp(-(beta[0] + X @ beta[1:])))).astype(float)
        if 0 < y.sum() < n:
            return Dataset(y, X, names or ())


@pytest.fixture
def small_data(rng):
    return make_data(rng)


# One summary line per acceptance criterion, printed after the test session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
