import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from seqmon.basis import make_additive_cubic_spline, make_linear

settings.register_profile("seqmon", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("seqmon")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spline3():
    return make_additive_cubic_spline(3, 4, (-2.0, 2.0))


@pytest.fixture
def linear3():
    return make_linear(3)


def random_stream(rng, n, basis, effect=0.0, p=0.5):
    """Covariates in [-2, 2]^d, balanced arms and a linear outcome."""
    X = rng.uniform(-2.0, 2.0, size=(n, basis.dim_x))
    arms = (rng.random(n) < p).astype(np.int64)
    y = 1.0 + X.sum(axis=1) * 0.3 + effect * arms + rng.standard_normal(n)
    return X, arms, y
