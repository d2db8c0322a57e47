import numpy as np
import pytest
from scipy.special import expit
from sklearn.linear_model import ElasticNet, LogisticRegression, Ridge
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from gamlab._validation import balanced_weights
from gamlab.baselines import (CARTClassifier, CARTRegressor, ElasticNetRegressor,
                              LogisticElasticNet, _impurity, elastic_net_path_point,
                              fit_elastic_net, penalty_to_alpha)


def _reg_data(n=200, p=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = np.array([2.0, -1.0, 0.0, 0.0, 0.5, 0.0])[:p]
    return X, X @ beta + rng.normal(0, 0.5, n)


def _cls_data(n=300, p=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (rng.uniform(size=n) < expit(X @ np.array([1.5, -1.0, 0.0, 0.3])[:p] - 0.8)) * 1.0
    return X, y


@pytest.mark.parametrize("alpha,l1_ratio", [(0.1, 0.0), (0.1, 0.5), (0.05, 1.0), (1.0, 0.2)])
def test_elastic_net_matches_sklearn(alpha, l1_ratio):
    X, y = _reg_data()
    est = ElasticNetRegressor(alpha=alpha, l1_ratio=l1_ratio, tol=1e-12, max_iter=100000)
    est.fit(X, y)
    if l1_ratio == 0.0:
        # pure ridge: 1/(2n)|r|^2 + alpha/2 |b|^2 is Ridge with penalty n * alpha
        ref = Ridge(alpha=alpha * len(y)).fit(X, y)
    else:
        ref = ElasticNet(alpha=alpha, l1_ratio=l1_ratio, tol=1e-12, max_iter=100000).fit(X, y)
    np.testing.assert_allclose(est.predict(X), ref.predict(X), atol=1e-6)


@pytest.mark.parametrize("alpha,l1_ratio", [(0.05, 1.0), (0.2, 0.5)])
def test_elastic_net_kkt(alpha, l1_ratio):
    X, y = _reg_data()
    b0, beta, conv = elastic_net_path_point(X, y, alpha, l1_ratio, tol=1e-12, max_iter=100000)
    assert conv
    grad = -X.T @ (y - b0 - X @ beta) / len(y)
    zero = beta == 0
    assert zero.any()
    assert np.all(np.abs(grad[zero]) <= alpha * l1_ratio + 1e-6)
    nz = ~zero
    expected = -alpha * (l1_ratio * np.sign(beta[nz]) + (1 - l1_ratio) * beta[nz])
    np.testing.assert_allclose(grad[nz], expected, atol=1e-6)


@pytest.mark.parametrize("penalty,solver,l1_ratio,C", [
    ("l2", "lbfgs", None, 1.0), ("l1", "liblinear", None, 0.1),
    ("elasticnet", "saga", 0.5, 0.5), (None, "lbfgs", None, 1.0)])
def test_logistic_matches_sklearn_objective(penalty, solver, l1_ratio, C):
    X, y = _cls_data()
    est = LogisticElasticNet(C=C, penalty=penalty, solver=solver, l1_ratio=l1_ratio,
                             tol=1e-12, max_iter=500).fit(X, y)
    kw = dict(C=C, l1_ratio=l1_ratio, tol=1e-12, max_iter=100000)
    if penalty is None:
        ref = LogisticRegression(penalty=None, solver="lbfgs", **kw)
    else:
        ref = LogisticRegression(penalty=penalty, solver="saga", **kw)
    ref.fit(X, y)
    np.testing.assert_allclose(est.coef_, ref.coef_[0], atol=1e-4)
    np.testing.assert_allclose(est.intercept_, ref.intercept_[0], atol=1e-4)


def test_logistic_class_weight_balanced_matches_sklearn():
    X, y = _cls_data(seed=3)
    est = LogisticElasticNet(C=1.0, class_weight="balanced", tol=1e-12, max_iter=500).fit(X, y)
    ref = LogisticRegression(C=1.0, class_weight="balanced", tol=1e-12, max_iter=10000).fit(X, y)
    np.testing.assert_allclose(est.coef_, ref.coef_[0], atol=1e-5)


def test_penalty_mapping():
    assert penalty_to_alpha(2.0, "l2", None, 100) == (1 / 200, 0.0)
    assert penalty_to_alpha(2.0, "l1", None, 100) == (1 / 200, 1.0)
    assert penalty_to_alpha(2.0, None, None, 100) == (0.0, 0.0)
    with pytest.raises(ValueError):
        penalty_to_alpha(1.0, "elasticnet", None, 10)


def test_balanced_weights():
    y = np.array([0, 0, 0, 1.0])
    w = balanced_weights(y)
    np.testing.assert_allclose(w, [4 / 6, 4 / 6, 4 / 6, 2.0])
    assert abs(w.sum() - len(y)) < 1e-9


def test_linear_model_is_additive():
    X, y = _reg_data()
    m = ElasticNetRegressor(alpha=0.01).fit(X, y).model_
    np.testing.assert_allclose(m.contributions(X).sum(axis=1), m.predict_raw(X), atol=1e-12)
    np.testing.assert_allclose(m.contributions(X)[:, 1:].mean(axis=0), 0.0, atol=1e-12)


def test_linear_model_groups_categoricals(mixed_reg):
    m = fit_elastic_net(mixed_reg, alpha=0.01)
    assert m.shape("color").is_categorical


@pytest.mark.parametrize("depth", [1, 3, 6])
def test_cart_regressor_matches_sklearn(depth):
    X, y = _reg_data(seed=2)
    ours = CARTRegressor(max_depth=depth).fit(X, y)
    ref = DecisionTreeRegressor(max_depth=depth, random_state=0).fit(X, y)
    np.testing.assert_allclose(ours.predict(X), ref.predict(X), atol=1e-12)


@pytest.mark.parametrize("kw", [dict(max_depth=4), dict(max_leaf_nodes=7),
                                dict(max_depth=3, class_weight="balanced")])
def test_cart_classifier_matches_sklearn(kw):
    X, y = _cls_data(seed=5)
    ours = CARTClassifier(**kw).fit(X, y)
    ref = DecisionTreeClassifier(random_state=0, **kw).fit(X, y)
    np.testing.assert_allclose(ours.predict_proba(X)[:, 1], ref.predict_proba(X)[:, 1],
                               atol=1e-12)


def test_cart_splits_strictly_reduce_impurity():
    X, y = _cls_data(seed=7)
    tree = CARTClassifier(max_depth=5).fit(X, y).tree_
    w = np.ones(len(y))
    # route every row and recompute node impurities from scratch
    paths = {0: np.arange(len(y))}
    for i in range(len(tree.feature)):
        rows = paths[i]
        if tree.feature[i] < 0:
            continue
        go = X[rows, tree.feature[i]] <= tree.threshold[i]
        paths[tree.left[i]], paths[tree.right[i]] = rows[go], rows[~go]

        def imp(r):
            return _impurity((w[r].sum(), w[r] @ y[r], w[r] @ (y[r] ** 2)), True)
        assert imp(paths[tree.left[i]]) + imp(paths[tree.right[i]]) < imp(rows)


def test_cart_leaf_budget_and_depth():
    X, y = _reg_data(seed=2)
    t = CARTRegressor(max_leaf_nodes=5).fit(X, y).tree_
    assert t.n_leaves == 5
    assert CARTRegressor(max_depth=2).fit(X, y).tree_.depth <= 2


def test_cart_random_splitter_is_seeded():
    X, y = _reg_data(seed=2)
    a = CARTRegressor(splitter="random", max_depth=4, random_state=1).fit(X, y).predict(X)
    b = CARTRegressor(splitter="random", max_depth=4, random_state=1).fit(X, y).predict(X)
    np.testing.assert_array_equal(a, b)


def test_cart_validation():
    X, y = _reg_data()
    with pytest.raises(ValueError):
        CARTRegressor(splitter="odd").fit(X, y)
    with pytest.raises(ValueError):
        CARTClassifier().fit(X, y)
