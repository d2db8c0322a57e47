from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from gamlab.metrics import (auroc, higher_is_better, primary_metric, rank_models,
                            reference_cells, rmse, round_half_up, secondary_metrics,
                            summarize_folds)

REFERENCE = Path(__file__).parent / "data" / "reference_average_ranks.csv"
POLICY = {"default": True, "tuned": {"classification": True, "regression": False}}


def brute_auroc(y, s):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def _instance(rng):
    n = int(rng.integers(2, 31))
    y = rng.integers(0, 2, n).astype(float)
    y[:2] = [0, 1]
    # few distinct values force ties
    s = rng.integers(0, 6, n).astype(float) if rng.uniform() < 0.5 else rng.normal(size=n)
    return y, s


def test_auroc_matches_pairwise_count():
    rng = np.random.default_rng(0)
    for _ in range(200):
        y, s = _instance(rng)
        assert abs(auroc(y, s) - brute_auroc(y, s)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-5, 5)), min_size=2, max_size=40))
def test_auroc_property(pairs):
    y = np.array([p[0] for p in pairs], dtype=float)
    s = np.array([p[1] for p in pairs], dtype=float)
    if y.min() == y.max():
        with pytest.raises(ValueError):
            auroc(y, s)
        return
    a = auroc(y, s)
    assert abs(a - brute_auroc(y, s)) <= 1e-12
    assert abs(auroc(y, np.exp(s / 3.0)) - a) <= 1e-12
    assert abs(auroc(y, -s) - (1 - a)) <= 1e-12
    assert abs(auroc(1 - y, s) - (1 - a)) <= 1e-12


def test_auroc_agrees_with_sklearn():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 500).astype(float)
    s = np.round(rng.normal(size=500) + y, 1)
    assert abs(auroc(y, s) - skm.roc_auc_score(y, s)) <= 1e-12


def test_auroc_errors():
    with pytest.raises(ValueError):
        auroc([1, 1, 1], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        auroc([0, 2], [0.1, 0.2])
    with pytest.raises(ValueError):
        auroc([0, 1], [0.1])


def test_rmse():
    assert rmse([0, 0, 0, 0], [1, -1, 1, -1]) == 1.0
    assert rmse([1.5], [1.5]) == 0.0
    with pytest.raises(ValueError):
        rmse([], [])
    with pytest.raises(ValueError):
        rmse([1, 2], [1])


def test_primary_metric_dispatch():
    y, p = np.array([0, 1, 1, 0.0]), np.array([0.2, 0.7, 0.4, 0.5])
    assert primary_metric("classification", y, p) == skm.roc_auc_score(y, p)
    assert primary_metric("regression", y, p) == rmse(y, p)
    assert higher_is_better("classification") and not higher_is_better("regression")


def test_secondary_metrics_match_sklearn():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 100)
    p = rng.uniform(size=100)
    m = secondary_metrics("classification", y, p)
    yhat = (p >= 0.5).astype(int)
    assert m["accuracy"] == skm.accuracy_score(y, yhat)
    assert m["f1_macro"] == skm.f1_score(y, yhat, average="macro")
    assert m["precision_undefined"] == 0.0
    none = secondary_metrics("classification", y, np.zeros(100))
    assert none["precision"] == 0.0 and none["precision_undefined"] == 1.0
    yr, pr = rng.normal(size=50), rng.normal(size=50)
    r = secondary_metrics("regression", yr, pr)
    assert r["mae"] == skm.mean_absolute_error(yr, pr)
    assert r["r2"] == skm.r2_score(yr, pr)


def test_round_half_up():
    assert round_half_up(Fraction(2385, 1000)) == Decimal("2.39")
    assert round_half_up(Fraction(57, 20)) == Decimal("2.85")
    assert round_half_up(Fraction(81, 20) + Fraction(1, 400)) == Decimal("4.05")
    assert round_half_up(0.125, 2) == Decimal("0.13")
    assert round_half_up(Fraction(-1, 8), 2) == Decimal("-0.13")


@pytest.mark.parametrize("setting", ["default", "tuned"])
def test_reproduces_reference_average_ranks(setting):
    pub = pd.read_csv(REFERENCE, dtype={"average_rank": str})
    pub = pub[pub.table == setting]
    table = rank_models(reference_cells(setting), std_tiebreak=POLICY[setting])
    got = {(g, m): str(v) for g in ("classification", "regression", "total")
           for m, v in table.rounded(g).items()}
    want = {(r.group, r.model): r.average_rank for r in pub.itertuples()}
    assert got == want


def test_reference_cells_setting_checked():
    with pytest.raises(ValueError):
        reference_cells("other")


def _cells(rows, task="regression"):
    return pd.DataFrame(rows, columns=["dataset", "model", "mean", "std"]).assign(task=task)


def test_rank_scale_consistency():
    table = rank_models(reference_cells("default"))
    M = len(table.models)
    for r in table.ranks.values():
        assert sum(r.values()) == Fraction(M * (M + 1), 2)
    for g in ("classification", "regression", "total"):
        assert sum(table.average[g].values()) == Fraction(M * (M + 1), 2)


def test_ties_policies():
    cells = _cells([("d", "a", 1.0, 0.2), ("d", "b", 1.0, 0.1), ("d", "c", 2.0, 0.0)])
    assert rank_models(cells).ranks[("regression", "d")] == {"a": 2, "b": 1, "c": 3}
    plain = rank_models(cells, std_tiebreak=False).ranks[("regression", "d")]
    assert plain == {"a": Fraction(3, 2), "b": Fraction(3, 2), "c": 3}
    named = rank_models(cells, std_tiebreak=False, ties="name").ranks[("regression", "d")]
    assert named == {"a": 1, "b": 2, "c": 3}
    with pytest.raises(ValueError):
        rank_models(cells, ties="random")


def test_direction_follows_task():
    cells = _cells([("d", "a", 0.9, 0.0), ("d", "b", 0.8, 0.0)], task="classification")
    assert rank_models(cells).ranks[("classification", "d")] == {"a": 1, "b": 2}
    cells = cells.assign(task="regression")
    assert rank_models(cells).ranks[("regression", "d")] == {"a": 2, "b": 1}


def test_single_group_has_no_total():
    table = rank_models(_cells([("d", "a", 1.0, 0.0), ("d", "b", 2.0, 0.0)]))
    assert set(table.average) == {"regression"}


def test_rank_errors():
    cells = _cells([("d", "a", 1.0, 0.0), ("d", "a", 2.0, 0.0)])
    with pytest.raises(ValueError, match="duplicate"):
        rank_models(cells)
    cells = _cells([("d", "a", 1.0, 0.0), ("d", "b", 2.0, 0.0), ("e", "a", 1.0, 0.0)])
    with pytest.raises(ValueError, match="missing"):
        rank_models(cells)
    with pytest.raises(ValueError):
        rank_models(cells.drop(columns="task"))


def test_text_and_csv_outputs(tmp_path):
    cells = _cells([("d", "a", 1.0, 0.0), ("d", "b", 2.0, 0.0), ("d", "c", 3.0, 0.0)])
    table = rank_models(cells)
    line = table.to_text().splitlines()[1]
    assert "1.000±0.000*" in line and "2.000±0.000_" in line and "3.000±0.000 " in line
    text = table.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text
    frame = pd.read_csv(tmp_path / "r.csv")
    assert frame[frame.dataset == "AVERAGE"]["rank"].tolist() == [1.0, 2.0, 3.0]


def test_summarize_folds():
    folds = pd.DataFrame({"task": "regression", "dataset": "d", "model": ["a"] * 3 + ["b"] * 2,
                          "value": [1.0, 2.0, 3.0, 5.0, 5.0]})
    s = summarize_folds(folds).set_index("model")
    assert s.loc["a", "mean"] == 2.0
    assert abs(s.loc["a", "std"] - np.sqrt(2 / 3)) <= 1e-12
    assert s.loc["b", "std"] == 0.0 and s.loc["b", "n_folds"] == 2
