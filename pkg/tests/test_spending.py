import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from seqmon.spending import KINDS, SpendingFunction, alpha_spend


@pytest.mark.parametrize("kind", KINDS)
class TestEndpoints:
    def test_full_budget_at_horizon(self, kind):
        f = SpendingFunction(kind, 0.05, 3600.0, theta=2.0, gamma=-3.0)
        assert f(3600.0) == pytest.approx(0.05, rel=1e-12)

    def test_zero_at_start(self, kind):
        assert SpendingFunction(kind, 0.05, 10.0)(0.0) == 0.0

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_nondecreasing(self, kind, s, t):
        f = SpendingFunction(kind, 0.05, 1.0, theta=1.5, gamma=2.0)
        lo, hi = sorted((s, t))
        assert f(lo) <= f(hi) + 1e-15


def test_pocock_closed_form():
    f = SpendingFunction("pocock", 0.05, 2.0)
    assert f(1.0) == pytest.approx(0.05 * math.log(1 + (math.e - 1) / 2), rel=1e-15)


def test_obf_matches_scipy_normal():
    f = SpendingFunction("obf", 0.05, 1.0)
    for t in (0.01, 0.25, 0.5, 0.9):
        oracle = 2 - 2 * norm.cdf(norm.ppf(1 - 0.05 / 2) / math.sqrt(t))
        assert f(t) == pytest.approx(oracle, rel=1e-9)


def test_power_half():
    assert SpendingFunction("power", 0.05, 4.0, theta=1.0)(2.0) == pytest.approx(0.025, rel=1e-15)


def test_exponential_closed_form():
    f = SpendingFunction("exponential", 0.05, 1.0, gamma=3.0)
    assert f(0.4) == pytest.approx(0.05 * (1 - np.exp(-1.2)) / (1 - np.exp(-3.0)), rel=1e-14)


@pytest.mark.parametrize("kw", [dict(kind="power", theta=0.0), dict(kind="exponential", gamma=0.0),
                                dict(kind="nope"), dict(alpha=1.5), dict(T=0.0)])
def test_invalid_parameters(kw):
    with pytest.raises(ValueError):
        SpendingFunction(**kw)


@pytest.mark.parametrize("t", [-0.1, 1.1])
def test_outside_horizon(t):
    with pytest.raises(ValueError):
        alpha_spend(SpendingFunction(), t)
