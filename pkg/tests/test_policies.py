import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from seqmon.basis import make_linear
from seqmon.policies import (
    EpsilonGreedyPolicy,
    GreedyTracker,
    PolicySnapshot,
    RandomPolicy,
    assign,
    greedy_arm,
    policy_from_dict,
    propensity,
)
from seqmon.stream import ArmState

GREEDY = EpsilonGreedyPolicy(epsilon=0.3, burn_in=50)


def _snapshot(contrast, n=100, d=2):
    return PolicySnapshot(make_linear(d), None if contrast is None else np.asarray(contrast, float), n)


class TestPropensity:
    def test_random(self):
        assert propensity(RandomPolicy(), (0.3, -1.0)) == 0.5
        assert propensity(RandomPolicy(0.2), ()) == 0.2

    @pytest.mark.parametrize("x,expected", [((1.0, 0.0), 0.7), ((-1.0, 0.0), 0.3), ((0.0, 0.0), 0.3)])
    def test_greedy_sign(self, x, expected):
        assert propensity(GREEDY, x, _snapshot([0.0, 1.0, 0.0])) == pytest.approx(expected)

    def test_tie_goes_to_arm_zero(self):
        assert greedy_arm(GREEDY, (0.0, 0.0), _snapshot([0.0, 1.0, 0.0])) == 0

    @pytest.mark.parametrize("snap", [None, _snapshot([0.0, 1.0, 0.0], n=49), _snapshot(None)])
    def test_falls_back_to_half(self, snap):
        assert propensity(GREEDY, (1.0, 1.0), snap) == 0.5

    @given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3),
           st.lists(st.floats(-10, 10), min_size=2, max_size=2),
           st.integers(0, 200), st.floats(0.01, 0.99))
    def test_value_set(self, contrast, x, n, eps):
        p = propensity(EpsilonGreedyPolicy(eps, 50), x, _snapshot(contrast, n=n))
        assert p in (eps, 1 - eps, 0.5)
        assert 0 < p < 1

    def test_snapshot_from_rank_deficient_state(self):
        st_ = ArmState(3)
        st_.ingest(np.ones((60, 3)), np.ones(60, dtype=np.int64), np.ones(60))
        snap = PolicySnapshot.from_state(st_, make_linear(2))
        assert snap.contrast is None and propensity(GREEDY, (1.0, 1.0), snap) == 0.5


class TestAssign:
    def test_frequency(self):
        rng = np.random.default_rng(0)
        snap = _snapshot([1.0, 0.0, 0.0])
        arms = [assign(GREEDY, (0.0, 0.0), snap, rng)[0] for _ in range(100_000)]
        assert abs(np.mean(arms) - 0.7) < 0.005

    def test_deterministic_given_seed(self):
        draws = [[assign(RandomPolicy(), (), None, np.random.default_rng(3))[0] for _ in range(5)]
                 for _ in range(2)]
        assert draws[0] == draws[1]

    def test_independent_of_covariates_under_randomization(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((20_000, 1))
        arms = np.array([assign(RandomPolicy(), x, None, rng)[0] for x in X])
        table = np.array([[np.sum((arms == a) & ((X[:, 0] > 0) == s)) for s in (0, 1)] for a in (0, 1)])
        assert chi2_contingency(table).pvalue > 1e-3


class TestPolicySerialization:
    @pytest.mark.parametrize("pol", [RandomPolicy(0.4), EpsilonGreedyPolicy(0.1, 20)])
    def test_round_trip(self, pol):
        assert policy_from_dict(pol.to_dict()) == pol

    @pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(epsilon=1.0), dict(burn_in=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            EpsilonGreedyPolicy(**kw)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            policy_from_dict({"kind": "thompson"})


def _stream(rng, n):
    X = rng.uniform(-1, 1, size=(n, 2))
    phi = make_linear(2).eval_many(X)
    y0 = X[:, 1] + rng.standard_normal(n)
    y1 = y0 + X[:, 0]
    return X, phi, rng.random(n), y0, y1


def _naive_greedy(policy, phi, u, y0, y1):
    """Refit both arms by least squares before every assignment."""
    arms, props = [], []
    for i in range(len(u)):
        p = 0.5
        A = np.array(arms, dtype=int)
        if i >= policy.burn_in:
            fits = []
            for a in (0, 1):
                rows = phi[:i][A == a]
                if np.linalg.matrix_rank(rows) < phi.shape[1]:
                    break
                obs = np.where(A == 1, y1[:i], y0[:i])[A == a]
                fits.append(np.linalg.lstsq(rows, obs, rcond=None)[0])
            else:
                p = 1 - policy.epsilon if phi[i] @ (fits[1] - fits[0]) > 0 else policy.epsilon
        arms.append(int(u[i] < p))
        props.append(p)
    return np.array(arms), np.array(props)


class TestGreedyTracker:
    def test_matches_naive_refit(self, rng):
        _, phi, u, y0, y1 = _stream(rng, 400)
        tracker = GreedyTracker(GREEDY, 3)
        out = [tracker.run(phi[i:i + 100], u[i:i + 100], y0[i:i + 100], y1[i:i + 100]) for i in range(0, 400, 100)]
        arms = np.concatenate([o[0] for o in out])
        props = np.concatenate([o[1] for o in out])
        ref_arms, ref_props = _naive_greedy(GREEDY, phi, u, y0, y1)
        np.testing.assert_array_equal(arms, ref_arms)
        np.testing.assert_array_equal(props, ref_props)

    def test_coefficients_match_lstsq(self, rng):
        _, phi, u, y0, y1 = _stream(rng, 1000)
        tracker = GreedyTracker(GREEDY, 3)
        arms, _, ys = tracker.run(phi, u, y0, y1)
        for a in (0, 1):
            ref = np.linalg.lstsq(phi[arms == a], ys[arms == a], rcond=None)[0]
            np.testing.assert_allclose(tracker.beta[a], ref, rtol=1e-8, atol=1e-10)

    def test_burn_in(self, rng):
        _, phi, u, y0, y1 = _stream(rng, 200)
        _, props, _ = GreedyTracker(GREEDY, 3).run(phi, u, y0, y1)
        assert np.all(props[:50] == 0.5)
        assert set(np.unique(props[50:])) <= {0.3, 0.7}

    def test_random_policy(self, rng):
        _, phi, u, y0, y1 = _stream(rng, 100)
        arms, props, ys = GreedyTracker(RandomPolicy(), 3).run(phi, u, y0, y1)
        np.testing.assert_array_equal(arms, u < 0.5)
        np.testing.assert_array_equal(ys, np.where(arms == 1, y1, y0))
        assert np.all(props == 0.5)

    def test_greedy_choice_converges(self, rng):
        X, phi, u, y0, y1 = _stream(rng, 10_000)
        arms = GreedyTracker(GREEDY, 3).run(phi, u, y0, y1)[0]
        best = (X[:, 0] > 0).astype(int)
        early = np.mean(arms[:2000] == best[:2000])
        late = np.mean(arms[5000:] == best[5000:])
        assert late > early
        assert abs(late - 0.7) < 0.02
