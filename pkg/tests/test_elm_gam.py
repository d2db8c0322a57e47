import numpy as np
import pytest

from conftest import prepared
from gamlab.core import PiecewiseLinear
from gamlab.elm_gam import ElmGAMClassifier, ElmGAMRegressor, elu, fit_elm_gam


def test_elu_is_smooth_at_zero():
    h = 1e-6
    left = (elu(0.0) - elu(-h)) / h
    right = (elu(h) - elu(0.0)) / h
    assert abs(left - right) < 1e-5


def test_round_zero_shapes_are_affine(mixed_reg):
    m = fit_elm_gam(mixed_reg, n_boost_rounds=0)
    for s in m.shapes:
        if isinstance(s.repr, PiecewiseLinear):
            np.testing.assert_allclose(np.diff(s.repr.y, 2), 0.0, atol=1e-12)


def test_linear_start_matches_least_squares():
    data = prepared("linear", n=500, seed=0)
    est = ElmGAMRegressor(n_boost_rounds=0, validation_fraction=0.1).fit(data)
    assert est.n_rounds_ == 0
    X, y = data.matrix(), data.target
    ols = np.linalg.lstsq(np.column_stack([np.ones(len(y)), X]), y, rcond=None)[0][1:]
    # the init sees the 90% fit split only, so agreement is statistical
    np.testing.assert_allclose(est.linear_coef_, ols, atol=0.02)


def test_validation_loss_non_increasing():
    data = prepared("mixed", n=1000, task="classification", seed=4)
    est = ElmGAMClassifier(n_boost_rounds=200).fit(data)
    h = est.validation_history_
    assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))
    assert h[-1] < h[0]


def test_fixed_seed_is_bitwise_deterministic(mixed_reg):
    a = fit_elm_gam(mixed_reg, n_boost_rounds=100, interactions=1, random_state=3)
    b = fit_elm_gam(mixed_reg, n_boost_rounds=100, interactions=1, random_state=3)
    for sa, sb in zip(a.shapes, b.shapes):
        r1, r2 = sa.repr, sb.repr
        np.testing.assert_array_equal(getattr(r1, "y", getattr(r1, "values", None)),
                                      getattr(r2, "y", getattr(r2, "values", None)))
    np.testing.assert_array_equal(a.interactions[0].values, b.interactions[0].values)


def test_contribution_depends_only_on_own_feature(mixed_reg):
    m = fit_elm_gam(mixed_reg, n_boost_rounds=50)
    X = mixed_reg.matrix()
    Y = X.copy()
    j = mixed_reg.feature_names.index("x0")
    others = [k for k in range(X.shape[1]) if k != j]
    Y[:, others] = np.random.default_rng(0).permutation(Y[:, others])
    k = m.term_names.index("x0")
    np.testing.assert_array_equal(m.contributions(X)[:, k], m.contributions(Y)[:, k])


def test_shapes_stored_on_256_point_grid(mixed_reg):
    m = fit_elm_gam(mixed_reg, n_boost_rounds=10)
    s = m.shape("x0").repr
    assert isinstance(s, PiecewiseLinear) and len(s.x) == 256


def test_sparse_drops_negligible_shapes():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(-1, 1, 400), 1e-7 * rng.normal(size=400)])
    y = np.sin(2 * X[:, 0]) + rng.normal(0, 0.1, 400)
    dense = ElmGAMRegressor(n_boost_rounds=30).fit(X, y).model_
    sparse = ElmGAMRegressor(n_boost_rounds=30, sparse=True).fit(X, y).model_
    assert [s.feature for s in dense.shapes] == ["x0", "x1"]
    assert [s.feature for s in sparse.shapes] == ["x0"]
    assert sparse.metadata["sparse"] is True


def test_interactions_are_heatmaps(mixed_reg):
    m = fit_elm_gam(mixed_reg, n_boost_rounds=50, interactions=2)
    assert len(m.interactions) == 2
    X = mixed_reg.matrix()
    np.testing.assert_allclose(m.contributions(X).sum(axis=1), m.predict_raw(X), atol=1e-12)


def test_recovers_sine():
    data = prepared("sine", n=1000, noise=0.1, seed=1)
    est = ElmGAMRegressor().fit(data)
    resid = est.predict(data.matrix()) - data.target
    assert np.sqrt(np.mean(resid ** 2)) < 0.25


def test_parameter_validation(mixed_reg):
    with pytest.raises(ValueError):
        ElmGAMRegressor(elm_scale=0).fit(mixed_reg)
    with pytest.raises(TypeError):
        ElmGAMRegressor(sparse=1).fit(mixed_reg)
