import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from seqmon.basis import BasisKind, BasisSpec, eval_basis, make_additive_cubic_spline, make_linear


class TestLinear:
    def test_dimension(self):
        assert make_linear(3).q == 4

    def test_intercept_only(self):
        spec = make_linear(0)
        assert spec.q == 1
        np.testing.assert_array_equal(spec.eval(np.empty(0)), [1.0])

    @pytest.mark.parametrize("x, expected", [((0.5, -1.0), (1.0, 0.5, -1.0)), ((1.0, 2.0), (1.0, 1.0, 2.0))])
    def test_identity_embedding(self, x, expected):
        np.testing.assert_array_equal(eval_basis(make_linear(2), x), expected)

    def test_negative_dimension(self):
        with pytest.raises(ValueError):
            make_linear(-1)

    def test_unbounded_support_accepts_large_values(self):
        np.testing.assert_array_equal(make_linear(1).eval([1e6]), [1.0, 1e6])


class TestSplineConstruction:
    def test_dimension_and_knots(self, spline3):
        assert spline3.q == 22
        for j in range(3):
            np.testing.assert_allclose(spline3.knots[j], [-1.2, -0.4, 0.4, 1.2], atol=1e-15)

    @pytest.mark.parametrize("d, m", [(3, 4), (1, 1), (2, 3)])
    def test_gram_rank_matches_dimension(self, d, m):
        spec = make_additive_cubic_spline(d, m, (-2.0, 2.0))
        assert spec.q == 1 + d * (m + 3)
        grid = np.random.default_rng(1).uniform(-2, 2, size=(4000, d))
        assert np.linalg.matrix_rank(spec.eval_many(grid)) == spec.q

    def test_dropping_nothing_would_be_rank_deficient(self, spline3):
        # oracle for the drop rule: the undropped blocks plus intercept are collinear
        X = np.random.default_rng(2).uniform(-2, 2, size=(2000, 3))
        full = np.hstack([np.ones((2000, 1))] + [spline3.full_block(j, X[:, j]) for j in range(3)])
        assert np.linalg.matrix_rank(full) == spline3.q

    @pytest.mark.parametrize("kw", [dict(d=3, internal_knots=0), dict(d=0, internal_knots=4),
                                    dict(d=1, internal_knots=2, support=(1.0, 1.0))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            make_additive_cubic_spline(**kw)

    def test_knots_strictly_inside_and_increasing(self):
        spec = make_additive_cubic_spline(2, 6, [(-1.0, 3.0), (0.0, 1.0)])
        for j, (lo, hi) in enumerate(spec.support):
            k = np.asarray(spec.knots[j])
            assert lo < k[0] and k[-1] < hi
            assert np.all(np.diff(k) > 0)


class TestSplineEvaluation:
    def test_matches_scipy_design_matrix(self, spline3):
        x = np.linspace(-2, 2, 301)
        t = spline3.full_knots(0)
        oracle = BSpline.design_matrix(x, t, 3).toarray()
        np.testing.assert_allclose(spline3.full_block(0, x), oracle, atol=1e-13)

    def test_eval_many_layout(self, spline3):
        X = np.random.default_rng(3).uniform(-2, 2, size=(50, 3))
        phi = spline3.eval_many(X)
        t = spline3.full_knots(0)
        assert np.all(phi[:, 0] == 1.0)
        for j in range(3):
            oracle = BSpline.design_matrix(X[:, j], t, 3).toarray()[:, 1:]
            np.testing.assert_allclose(phi[:, 1 + 7 * j: 1 + 7 * (j + 1)], oracle, atol=1e-13)

    def test_partition_of_unity(self, spline3):
        x = np.random.default_rng(4).uniform(-2, 2, size=1000)
        np.testing.assert_allclose(spline3.full_block(1, x).sum(axis=1), 1.0, atol=1e-12)

    @given(st.floats(-2.0, 2.0))
    def test_partition_of_unity_property(self, x):
        spec = make_additive_cubic_spline(1, 4, (-2.0, 2.0))
        assert abs(spec.full_block(0, np.array([x])).sum() - 1.0) < 1e-12

    def test_pure(self, spline3):
        X = np.random.default_rng(5).uniform(-2, 2, size=(100, 3))
        assert spline3.eval_many(X).tobytes() == spline3.eval_many(X.copy()).tobytes()

    def test_lipschitz_finite(self, spline3):
        g = np.linspace(-2, 2, 41)
        h = g[1] - g[0]
        base = np.stack([g, np.zeros_like(g), np.zeros_like(g)], axis=1)
        L = 0.0
        for j in range(3):
            pts = np.roll(base, j, axis=1)
            phi = spline3.eval_many(pts)
            L = max(L, float(np.max(np.linalg.norm(np.diff(phi, axis=0), axis=1) / h)))
        assert np.isfinite(L) and L > 0

    def test_gram_positive_definite(self, spline3):
        X = np.random.default_rng(6).uniform(-2, 2, size=(10_000, 3))
        phi = spline3.eval_many(X)
        assert np.linalg.eigvalsh(phi.T @ phi / 10_000)[0] > 0

    def test_clamps_within_tolerance(self, spline3):
        inside = spline3.eval([2.0, -2.0, 0.0])
        np.testing.assert_array_equal(spline3.eval([2.0 + 1e-10, -2.0 - 1e-10, 0.0]), inside)

    @pytest.mark.parametrize("x", [[2.001, 0, 0], [0, -3, 0], [np.nan, 0, 0]])
    def test_outside_support(self, spline3, x):
        with pytest.raises(ValueError):
            spline3.eval(x)

    def test_wrong_arity(self, spline3):
        with pytest.raises(ValueError, match="expected 3 covariates"):
            spline3.eval([0.0, 0.0])


@pytest.mark.parametrize("spec", [make_linear(2), make_linear(2, support=(-1, 1)),
                                  make_additive_cubic_spline(3, 4, (-2.0, 2.0))])
def test_dict_round_trip(spec):
    back = BasisSpec.from_dict(spec.to_dict())
    assert back == spec
    assert back.kind in (BasisKind.LINEAR, BasisKind.SPLINE)
