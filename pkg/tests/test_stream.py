import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqmon.basis import make_linear
from seqmon.qte import sup_statistic
from seqmon.stream import ArmState, Observation, as_batch


def batch_oracle(phi, arms, y):
    """Running averages and least squares recomputed from all stored data."""
    n = len(y)
    sig = np.stack([(phi[arms == a].T @ phi[arms == a]) / n for a in (0, 1)])
    gam = np.stack([(phi[arms == a].T @ y[arms == a]) / n for a in (0, 1)])
    beta = np.stack([np.linalg.lstsq(phi[arms == a], y[arms == a], rcond=None)[0] for a in (0, 1)])
    return sig, gam, beta


def offline_sandwich(stages, q):
    """Cumulative stage sandwich, refitting on all data up to each stage end."""
    cum = np.zeros((2, q, q))
    seen = []
    for phi, arms, y in stages:
        seen.append((phi, arms, y))
        P = np.concatenate([s[0] for s in seen])
        A = np.concatenate([s[1] for s in seen])
        Y = np.concatenate([s[2] for s in seen])
        n = len(Y)
        for a in (0, 1):
            S = P[A == a].T @ P[A == a] / n
            S_inv = np.linalg.inv(S)
            b = S_inv @ (P[A == a].T @ Y[A == a] / n)
            rows = phi[arms == a]
            r = y[arms == a] - rows @ b
            cum[a] += sum(S_inv @ np.outer(f, f) @ S_inv * ri**2 for f, ri in zip(rows, r))
    return cum


def _stream(rng, n, q):
    phi = np.hstack([np.ones((n, 1)), rng.standard_normal((n, q - 1))])
    arms = rng.integers(0, 2, n).astype(np.int64)
    y = phi @ rng.standard_normal(q) + 0.3 * arms + rng.standard_normal(n)
    return phi, arms, y


class TestObservation:
    def test_valid(self):
        X, a, y = as_batch([Observation((1.0, 2.0), 1, 3.0), Observation((0.0, 1.0), 0, -1.0)])
        assert X.shape == (2, 2) and list(a) == [1, 0] and list(y) == [3.0, -1.0]

    @pytest.mark.parametrize("kw", [dict(x=(0.0,), a=2, y=1.0), dict(x=(0.0,), a=1, y=np.nan),
                                    dict(x=(np.inf,), a=0, y=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Observation(**kw)


class TestIngest:
    def test_single_observation(self):
        st_ = ArmState(1)
        st_.ingest_one(make_linear(0), Observation((), 1, 3.0))
        assert st_.sigma[1] == [[1.0]] and st_.gamma[1] == [3.0] and st_.sigma[0] == [[0.0]]

    def test_one_by_one_matches_batch(self, rng):
        phi, arms, y = _stream(rng, 1000, 4)
        st_ = ArmState(4)
        for i in range(1000):
            st_.ingest(phi[i:i + 1], arms[i:i + 1], y[i:i + 1])
        sig, gam, _ = batch_oracle(phi, arms, y)
        assert st_.n == 1000
        for a in (0, 1):
            assert np.linalg.norm(st_.sigma[a] - sig[a]) / np.linalg.norm(sig[a]) < 1e-12
            assert np.linalg.norm(st_.gamma[a] - gam[a]) / np.linalg.norm(gam[a]) < 1e-12

    def test_nan_reward(self):
        with pytest.raises(ValueError):
            ArmState(2).ingest(np.ones((1, 2)), [0], [np.nan])

    def test_wrong_width(self):
        with pytest.raises(ValueError):
            ArmState(3).ingest(np.ones((1, 2)), [0], [1.0])

    @given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 60), min_size=1, max_size=6))
    def test_online_batch_equivalence(self, seed, sizes):
        rng = np.random.default_rng(seed)
        q = 3
        phi, arms, y = _stream(rng, sum(sizes) + 20, q)
        arms[:10], arms[10:20] = 0, 1  # both arms identifiable
        st_ = ArmState(q)
        start = 0
        for m in [20] + sizes:
            st_.ingest(phi[start:start + m], arms[start:start + m], y[start:start + m])
            start += m
        st_.refresh_coefficients()
        sig, gam, beta = batch_oracle(phi, arms, y)
        for a in (0, 1):
            assert np.linalg.norm(st_.sigma[a] - sig[a]) <= 1e-10 * np.linalg.norm(sig[a])
            assert np.linalg.norm(st_.gamma[a] - gam[a]) <= 1e-10 * max(np.linalg.norm(gam[a]), 1e-300)
            if st_.rank[a] == q and np.linalg.cond(sig[a]) < 1e6:
                assert np.linalg.norm(st_.beta[a] - beta[a]) <= 1e-8 * max(np.linalg.norm(beta[a]), 1.0)


class TestRefresh:
    def test_identity(self):
        st_ = ArmState(3)
        st_.sigma[1] = np.eye(3)
        st_.gamma[1] = [1.0, -2.0, 0.5]
        b0, b1 = st_.refresh_coefficients()
        np.testing.assert_array_equal(b1, [1.0, -2.0, 0.5])
        np.testing.assert_array_equal(b0, 0.0)

    def test_unobserved_arm_gives_zero(self, rng):
        st_ = ArmState(2)
        st_.ingest(np.ones((5, 2)), np.ones(5, dtype=np.int64), rng.standard_normal(5))
        b0, _ = st_.refresh_coefficients()
        np.testing.assert_array_equal(b0, 0.0)
        assert not st_.full_rank

    def test_matches_lstsq(self, rng):
        phi, arms, y = _stream(rng, 500, 4)
        st_ = ArmState(4)
        st_.ingest(phi, arms, y)
        b0, b1 = st_.refresh_coefficients()
        _, _, beta = batch_oracle(phi, arms, y)
        np.testing.assert_allclose(b0, beta[0], atol=1e-8)
        np.testing.assert_allclose(b1, beta[1], atol=1e-8)
        assert st_.full_rank


class TestSandwich:
    def test_zero_residuals(self, rng):
        phi = np.hstack([np.ones((40, 1)), rng.standard_normal((40, 1))])
        arms = np.tile([0, 1], 20).astype(np.int64)
        y = phi @ [1.0, 2.0]
        st_ = ArmState(2)
        st_.ingest(phi, arms, y)
        st_.refresh_coefficients()
        st_.stage_accumulate(phi, arms, y)
        np.testing.assert_allclose(st_.stage_sandwich, 0.0, atol=1e-20)

    def test_scalar_hand_computation(self):
        arms = np.array([1, 1, 0, 1], dtype=np.int64)
        y = np.array([1.0, 3.0, 5.0, 2.0])
        st_ = ArmState(1)
        st_.ingest(np.ones((4, 1)), arms, y)
        st_.refresh_coefficients()
        st_.stage_accumulate(np.ones((4, 1)), arms, y)
        p_hat = 3 / 4
        r = y[arms == 1] - 2.0
        assert st_.stage_sandwich[1, 0, 0] == pytest.approx(np.sum(r**2) / p_hat**2, rel=1e-14)

    def test_psd_after_batch(self, rng):
        phi, arms, y = _stream(rng, 300, 5)
        st_ = ArmState(5)
        st_.ingest(phi, arms, y)
        st_.refresh_coefficients()
        st_.stage_accumulate(phi, arms, y)
        for a in (0, 1):
            M = st_.stage_sandwich[a]
            np.testing.assert_array_equal(M, M.T)
            assert np.linalg.eigvalsh(M)[0] > -1e-10 * np.linalg.norm(M)

    def test_close_adds_blocks(self):
        st_ = ArmState(2)
        P1, P2 = np.eye(2), np.array([[2.0, 1.0], [1.0, 2.0]])
        st_.stage_sandwich[:] = P1
        st_.stage_close()
        st_.stage_sandwich[:] = P2
        st_.stage_close()
        np.testing.assert_array_equal(st_.cum_sandwich[0], P1 + P2)
        np.testing.assert_array_equal(st_.stage_sandwich, 0.0)
        st_.stage_close()
        np.testing.assert_array_equal(st_.cum_sandwich[1], P1 + P2)

    def test_offline_oracle(self, rng):
        q = 3
        stages = [_stream(rng, m, q) for m in (200, 60, 60, 60)]
        st_ = ArmState(q)
        for phi, arms, y in stages:
            st_.ingest(phi, arms, y)
            st_.refresh_coefficients()
            st_.stage_accumulate(phi, arms, y)
            st_.stage_close()
        oracle = offline_sandwich(stages, q)
        for a in (0, 1):
            assert np.linalg.norm(st_.cum_sandwich[a] - oracle[a]) < 1e-10 * np.linalg.norm(oracle[a])


class TestVariance:
    def test_zero(self):
        st_ = ArmState(2)
        st_.n = 10
        assert st_.variance_at(np.ones(2)) == 0.0

    def test_arithmetic(self):
        st_ = ArmState(1)
        st_.n = 100
        st_.cum_sandwich[1] = [[25.0]]
        st_.cum_sandwich[0] = [[11.0]]
        assert st_.variance_at([1.0]) == pytest.approx(0.0036, rel=1e-14)

    @given(st.floats(-50, 50, allow_nan=False), st.integers(0, 2**32 - 1))
    def test_quadratic_form(self, c, seed):
        rng = np.random.default_rng(seed)
        st_ = ArmState(3)
        st_.n = 40
        for a in (0, 1):
            A = rng.standard_normal((5, 3))
            st_.cum_sandwich[a] = A.T @ A
        phi = rng.standard_normal(3)
        assert st_.variance_at(c * phi) == pytest.approx(c * c * st_.variance_at(phi), rel=1e-12, abs=1e-300)

    @given(st.floats(0.01, 100.0))
    def test_scale_invariance_of_studentized_statistic(self, c):
        rng = np.random.default_rng(11)
        phi, arms, y = _stream(rng, 400, 3)
        grid = np.hstack([np.ones((50, 1)), rng.standard_normal((50, 2))])
        stats = []
        for scale in (1.0, c):
            st_ = ArmState(3)
            st_.ingest(phi, arms, scale * y)
            st_.refresh_coefficients()
            st_.stage_accumulate(phi, arms, scale * y)
            st_.stage_close()
            stats.append(sup_statistic(st_, grid))
        assert stats[0][1] == stats[1][1]
        assert stats[1][0] == pytest.approx(stats[0][0], rel=1e-8)


def test_dict_round_trip_and_copy(rng):
    phi, arms, y = _stream(rng, 100, 3)
    st_ = ArmState(3)
    st_.ingest(phi, arms, y)
    st_.refresh_coefficients()
    back = ArmState.from_dict(st_.to_dict())
    clone = st_.copy()
    st_.sigma[0, 0, 0] = 99.0
    for other in (back, clone):
        assert other.n == 100 and other.rank == [3, 3]
        assert other.sigma[0, 0, 0] != 99.0
        np.testing.assert_array_equal(other.beta, st_.beta)
