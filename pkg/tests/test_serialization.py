import json

import numpy as np
import pytest

from gamlab.baselines import CARTClassifier, fit_elastic_net
from gamlab.elm_gam import fit_elm_gam
from gamlab.pspline import fit_pspline
from gamlab.serialization import dumps, load_model, loads, model_from_dict, save_model
from gamlab.tree_gam import fit_tree_gam

ADDITIVE = {
    "pspline": lambda d: fit_pspline(d),
    "tree_gam": lambda d: fit_tree_gam(d, outer_bags=2, interactions=2, max_rounds=100),
    "elm_gam": lambda d: fit_elm_gam(d, n_boost_rounds=30, interactions=1),
    "linear": lambda d: fit_elastic_net(d, alpha=0.01),
}


@pytest.mark.parametrize("family", sorted(ADDITIVE))
def test_additive_round_trip_is_exact(family, mixed_reg):
    m = ADDITIVE[family](mixed_reg)
    again = loads(dumps(m))
    X = mixed_reg.matrix()
    np.testing.assert_array_equal(m.predict_raw(X), again.predict_raw(X))
    np.testing.assert_array_equal(m.contributions(X), again.contributions(X))
    assert dumps(again) == dumps(m)
    assert again.family == m.family and again.feature_names == m.feature_names


def test_tree_round_trip_via_file(mixed_cls, tmp_path):
    est = CARTClassifier(max_depth=4).fit(mixed_cls)
    save_model(est, tmp_path / "t.json")
    again = load_model(tmp_path / "t.json")
    X = mixed_cls.matrix()
    np.testing.assert_array_equal(est.tree_.predict(X), again.predict(X))


def test_non_finite_values_survive(mixed_reg):
    m = fit_pspline(mixed_reg)
    m.metadata["probe"] = [float("inf"), float("-inf"), float("nan"), 0.1]
    text = dumps(m)
    assert json.loads(text)["metadata"]["probe"] == ["inf", "-inf", "nan", 0.1]
    probe = loads(text).metadata["probe"]
    # metadata stays in its JSON-safe form after loading
    assert probe[:3] == ["inf", "-inf", "nan"] and probe[3] == 0.1


def test_format_and_version_checked(mixed_reg):
    d = json.loads(dumps(fit_pspline(mixed_reg)))
    with pytest.raises(ValueError, match="version"):
        model_from_dict({**d, "version": 99})
    with pytest.raises(ValueError, match="format"):
        model_from_dict({**d, "format": "other"})
    with pytest.raises(TypeError):
        dumps(object())
