import numpy as np
import pytest
from scipy.special import expit

from conftest import prepared
from gamlab.core import SplineCurve, bspline_design
from gamlab.pspline import (PSplineClassifier, PSplineRegressor, build_basis,
                            difference_matrix, fit_pspline)


def _augmented_solution(X, y, n_splines, lam, weights=None, offset=None):
    """Fitted values of the penalized problem, via an unconstrained min-norm lstsq.

    Shapes are identified only up to constants, which the difference penalty
    and the intercept absorb; the fitted values are still unique.
    """
    n, p = X.shape
    blocks, pens = [np.ones((n, 1))], []
    for j in range(p):
        basis = build_basis(X[:, j], n_splines)
        blocks.append(bspline_design(X[:, j], basis.knots, 3))
        pens.append(np.sqrt(lam) * difference_matrix(n_splines, 2))
    A = np.hstack(blocks)
    R = np.zeros((sum(P.shape[0] for P in pens), A.shape[1]))
    r0, c0 = 0, 1
    for P in pens:
        R[r0:r0 + P.shape[0], c0:c0 + P.shape[1]] = P
        r0, c0 = r0 + P.shape[0], c0 + P.shape[1]
    w = np.ones(n) if weights is None else weights
    sw = np.sqrt(w)[:, None]
    M = np.vstack([A * sw, R])
    rhs = np.concatenate([y * sw[:, 0], np.zeros(len(R))])
    theta = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return A @ theta


def test_regression_matches_penalized_least_squares_oracle():
    data = prepared("sine_step", n=300, seed=1)
    X, y = data.matrix(), data.target
    model = PSplineRegressor(n_splines=12, lam=0.6).fit(X, y).model_
    want = _augmented_solution(X, y, 12, 0.6)
    np.testing.assert_allclose(model.predict_raw(X), want, atol=1e-8)


def test_classifier_matches_irls_oracle():
    data = prepared("mixed", n=400, task="classification", seed=8)
    cols = [data.feature_names.index(c) for c in ("x0", "x1")]
    X, y = data.matrix()[:, cols], data.target
    est = PSplineClassifier(n_splines=8, lam=2.0).fit(X, y)
    # independent Newton iterations on the augmented system
    eta = np.full(len(y), np.log(y.mean() / (1 - y.mean())))
    for _ in range(50):
        mu = expit(eta)
        w = mu * (1 - mu)
        eta = _augmented_solution(X, eta + (y - mu) / w, 8, 2.0, weights=w)
    assert est.converged_
    np.testing.assert_allclose(est.predict_raw(X), eta, atol=1e-6)


def test_penalty_monotonicity():
    data = prepared("sine", n=400, seed=2)
    X, y = data.matrix(), data.target
    losses = [np.mean((PSplineRegressor(lam=lam).fit(X, y).predict(X) - y) ** 2)
              for lam in (0.0, 0.2, 0.6, 0.9, 10.0)]
    assert all(a <= b + 1e-12 for a, b in zip(losses, losses[1:]))


def test_irls_descent(mixed_cls):
    est = PSplineClassifier().fit(mixed_cls)
    hist = est.model_.metadata["penalized_objective_history"]
    assert len(hist) > 1
    assert all(b <= a + 1e-8 * max(1.0, abs(a)) for a, b in zip(hist, hist[1:]))


def _total_variation(model, name, lo, hi):
    g = np.linspace(lo, hi, 2001)
    return float(np.abs(np.diff(model.shape(name).evaluate(g[:, None]))).sum())


def test_flexibility_grows_with_n_splines():
    data = prepared("sine", n=2000, noise=0.1, seed=0)
    X, y = data.matrix(), data.target
    ks = (4, 5, 6, 8, 10, 12, 15, 20, 25)
    tv = dict(zip(ks, (_total_variation(PSplineRegressor(n_splines=k, lam=0.6).fit(X, y).model_,
                                        "x0", X.min(), X.max()) for k in ks)))
    growing = [tv[k] for k in ks if k <= 12]
    assert all(a < b for a, b in zip(growing, growing[1:])), tv
    # once the basis resolves the curve, extra splines leave the variation flat
    assert all(abs(tv[k] / tv[12] - 1) < 0.01 for k in ks if k > 12), tv


def test_shapes_are_centered_on_training_data(mixed_reg):
    m = fit_pspline(mixed_reg)
    c = m.contributions(mixed_reg.matrix())[:, 1:]
    assert np.all(np.abs(c.sum(axis=0)) <= 1e-8 * mixed_reg.n_rows)


def test_representations(mixed_reg):
    m = fit_pspline(mixed_reg)
    assert isinstance(m.shape("x0").repr, SplineCurve)
    assert m.shape("color").is_categorical
    assert m.shape("color").repr.levels == tuple(
        c.split("=", 1)[1] for c in mixed_reg.categorical_groups()["color"])


def test_binary_numeric_is_linear():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(size=300), (rng.uniform(size=300) > 0.5) * 1.0])
    y = np.sin(3 * X[:, 0]) + 2 * X[:, 1] + rng.normal(0, 0.1, 300)
    m = PSplineRegressor().fit(X, y).model_
    s = m.shape("x1")
    assert type(s.repr).__name__ == "Affine"
    assert abs(s.repr.slope - 2.0) < 0.1


def test_lambda_zero_interpolation_limit():
    x = np.linspace(0, 1, 30)
    y = x ** 2
    m = PSplineRegressor(n_splines=10, lam=0.0).fit(x[:, None], y).model_
    np.testing.assert_allclose(m.predict(x[:, None]), y, atol=1e-10)


def test_parameter_validation():
    X, y = np.random.default_rng(0).normal(size=(20, 1)), np.arange(20.0)
    with pytest.raises(ValueError):
        PSplineRegressor(n_splines=3).fit(X, y)
    with pytest.raises(ValueError):
        PSplineRegressor(lam=-1).fit(X, y)
    with pytest.raises(ValueError):
        PSplineClassifier().fit(X, y)


def test_huge_lambda_gives_linear_shapes():
    data = prepared("sine", n=400, seed=5)
    m = PSplineRegressor(lam=1e9).fit(data).model_
    g = np.linspace(data.matrix().min(), data.matrix().max(), 50)
    v = m.shape("x").evaluate(g[:, None])
    assert np.max(np.abs(np.diff(v, 2))) < 1e-6


def test_sklearn_clone_and_params():
    from sklearn.base import clone
    est = PSplineRegressor(n_splines=7, lam=0.3)
    assert clone(est).get_params() == est.get_params()
