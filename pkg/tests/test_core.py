import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import de_boor_basis, prepared
from gamlab.core import (AdditiveModel, Affine, CategoryTable, InteractionSurface, LinkKind,
                         ModelFamily, PiecewiseLinear, ShapeFunction, SplineCurve, StepFunction,
                         bspline_design, center_shapes, contributions, feature_importance,
                         predict_raw)
from gamlab.pspline import build_basis

BASIS_CONFIGS = [(-1.0, 2.0, 10, 3), (0.0, 1.0, 20, 3), (-5.0, 5.0, 8, 2)]


@pytest.mark.parametrize("lo,hi,n_splines,degree", BASIS_CONFIGS)
def test_bspline_matches_de_boor_oracle(lo, hi, n_splines, degree):
    rng = np.random.default_rng(0)
    basis = build_basis(np.array([lo, hi]), n_splines, degree)
    x = np.concatenate([[lo, hi], rng.uniform(lo, hi, 48)])
    got = bspline_design(x, basis.knots, degree)
    want = np.array([[de_boor_basis(v, basis.knots, j, degree) for j in range(n_splines)]
                     for v in x])
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


@pytest.mark.parametrize("lo,hi,n_splines,degree", BASIS_CONFIGS)
def test_bspline_partition_of_unity(lo, hi, n_splines, degree):
    basis = build_basis(np.array([lo, hi]), n_splines, degree)
    x = np.linspace(lo, hi, 101)
    np.testing.assert_allclose(bspline_design(x, basis.knots, degree).sum(axis=1), 1.0,
                               atol=1e-10)


def test_bspline_rejects_points_outside_domain():
    basis = build_basis(np.array([0.0, 1.0]), 6)
    with pytest.raises(ValueError):
        bspline_design(np.array([1.5]), basis.knots, 3)


def test_spline_curve_clamps_outside_domain():
    basis = build_basis(np.array([0.0, 1.0]), 8)
    curve = SplineCurve(basis.knots, np.arange(8.0), 3)
    assert curve(np.array([-3.0]))[0] == curve(np.array([0.0]))[0]
    assert curve(np.array([7.0]))[0] == curve(np.array([1.0]))[0]


def test_step_function_bins_and_extrapolation():
    f = StepFunction(np.array([0.0, 1.0, 2.0, 3.0]), np.array([10.0, 20.0, 30.0]))
    x = np.array([-5.0, 0.0, 0.5, 1.0, 2.999, 3.0, 9.0])
    np.testing.assert_array_equal(f(x), [10, 10, 10, 20, 30, 30, 30])
    with pytest.raises(ValueError):
        StepFunction(np.array([0.0, 1.0]), np.array([1.0, 2.0]))


def test_piecewise_linear_and_affine():
    f = PiecewiseLinear(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
    np.testing.assert_allclose(f(np.array([-1.0, 0.5, 1.5, 5.0])), [0, 1, 1, 0])
    a = Affine(2.0, 1.0, (0.0, 1.0))
    np.testing.assert_allclose(a(np.array([-1.0, 3.0])), [-1.0, 7.0])


def test_category_table_unseen_level_contributes_zero():
    t = CategoryTable(("a", "b"), np.array([1.5, -1.5]))
    np.testing.assert_allclose(t(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])), [1.5, -1.5, 0])


def _toy_model():
    shapes = (
        ShapeFunction("x", ("x",), StepFunction(np.array([0.0, 0.5, 1.0]), np.array([-1.0, 1.0]))),
        ShapeFunction("c", ("c=a", "c=b"), CategoryTable(("a", "b"), np.array([0.25, -0.25]))),
        ShapeFunction("z", ("z",), Affine(3.0, -1.0, (0.0, 1.0))),
    )
    inter = (InteractionSurface(("x", "z"), (np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0])),
                                np.array([[0.5], [-0.5]])),)
    return AdditiveModel(0.7, shapes, inter, LinkKind.LOGISTIC, ModelFamily.TREE_GAM,
                         ("x", "c=a", "c=b", "z"))


def test_additive_model_contributions_and_link():
    m = _toy_model()
    X = np.array([[0.2, 1, 0, 0.5], [0.9, 0, 1, 0.0]])
    c = m.contributions(X)
    np.testing.assert_allclose(c, [[0.7, -1.0, 0.25, 0.5, 0.5], [0.7, 1.0, -0.25, -1.0, -0.5]])
    np.testing.assert_allclose(m.predict_raw(X), c.sum(axis=1), atol=1e-15)
    p = m.predict(X)
    np.testing.assert_allclose(p, 1 / (1 + np.exp(-c.sum(axis=1))))
    assert m.term_names == ["intercept", "x", "c", "z", "x x z"]
    assert [t for t, _ in m.explain(X[0])] == m.term_names
    np.testing.assert_allclose(predict_raw(m, X[:1]), m.predict_raw(X[:1]))
    assert [n for n, _ in contributions(m, X[:1])] == m.term_names


def test_missing_numeric_contributes_zero():
    m = _toy_model()
    c = m.contributions(np.array([[np.nan, 1, 0, np.nan]]))
    assert c[0, 1] == 0.0 and c[0, 3] == 0.0 and c[0, 4] == 0.0


def test_model_rejects_unknown_columns():
    s = ShapeFunction("q", ("q",), Affine(1.0))
    with pytest.raises(ValueError):
        AdditiveModel(0.0, (s,), (), "identity", "linear", ("x",))


def test_model_accepts_dataframe_by_name():
    import pandas as pd
    m = _toy_model()
    X = np.array([[0.2, 1, 0, 0.5]])
    df = pd.DataFrame(X, columns=m.feature_names)[["z", "x", "c=b", "c=a"]]
    np.testing.assert_allclose(m.predict_raw(df), m.predict_raw(X))


def test_center_shapes_preserves_predictions():
    m = _toy_model()
    X = np.random.default_rng(1).uniform(0, 1, (50, 4))
    X[:, 1] = (X[:, 1] > 0.5).astype(float)
    X[:, 2] = 1 - X[:, 1]
    shapes, inter, off = center_shapes(m.shapes, m.interactions, X, m.feature_names)
    c = AdditiveModel(m.intercept + off, shapes, inter, m.link, m.family, m.feature_names)
    np.testing.assert_allclose(c.predict_raw(X), m.predict_raw(X), atol=1e-12)
    np.testing.assert_allclose(c.contributions(X)[:, 1:].mean(axis=0), 0.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=12, unique=True),
       st.floats(-50, 50))
def test_step_function_constant_within_bins(edges, shift):
    edges = np.sort(np.array(edges))
    values = np.arange(len(edges) - 1, dtype=float) + shift
    f = StepFunction(edges, values)
    mid = (edges[:-1] + edges[1:]) / 2
    # adjacent subnormal edges have no representable interior midpoint
    assume(np.all((edges[:-1] < mid) & (mid < edges[1:])))
    np.testing.assert_array_equal(f(edges[:-1]), f(mid))


def test_feature_importance_orders_terms():
    data = prepared("sine_step", n=300, seed=0)
    from gamlab import fit_pspline
    model = fit_pspline(data)
    imp = feature_importance(model, data.matrix())
    assert [v for _, v in imp] == sorted((v for _, v in imp), reverse=True)
    assert imp[0][0] == "x0"
