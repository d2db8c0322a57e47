import itertools
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamlab.interpretability import (CRITERIA, Criterion, Scorecard, default_evidence,
                                     default_sheet, krippendorff_alpha, read_sheet,
                                     read_weights, scorecards, total_score, tradeoff_table,
                                     weighted_score)

TOTALS = {"P-Splines": 7, "TP-Splines": 8, "EBM": 6, "NAM": 3, "GAMI-Net": 11, "ExNN": 3,
          "IGANN": 9, "LR": 12, "DT": 3, "RF": 1, "XGB": 2, "CatBoost": 2, "MLP": 0,
          "TabNet": 2}
GAMS = ["P-Splines", "TP-Splines", "EBM", "NAM", "GAMI-Net", "ExNN", "IGANN"]
BLACK_BOX = ["RF", "XGB", "CatBoost", "MLP", "TabNet"]
ALV = {"Additivity": 10, "Linearity": 10, "Visualizability": 10}


def brute_alpha(matrix, level="ordinal"):
    """Alpha from explicit enumeration of ordered pairable value pairs."""
    values = sorted({v for row in matrix for v in row if v is not None})
    idx = {v: i for i, v in enumerate(values)}
    o = [[Fraction(0)] * len(values) for _ in values]
    for u in range(len(matrix[0])):
        col = [row[u] for row in matrix if row[u] is not None]
        if len(col) < 2:
            continue
        for i, j in itertools.permutations(range(len(col)), 2):
            o[idx[col[i]]][idx[col[j]]] += Fraction(1, len(col) - 1)
    n_c = [sum(r) for r in o]
    n = sum(n_c)

    def delta(c, k):
        if level == "nominal":
            return 0 if c == k else 1
        if level == "interval":
            return (values[c] - values[k]) ** 2
        lo, hi = min(c, k), max(c, k)
        return (sum(n_c[lo:hi + 1]) - (n_c[lo] + n_c[hi]) / 2) ** 2

    pairs = list(itertools.product(range(len(values)), repeat=2))
    d_o = sum(o[c][k] * delta(c, k) for c, k in pairs)
    d_e = sum(n_c[c] * n_c[k] * delta(c, k) for c, k in pairs) / (n - 1)
    return 1 - d_o / d_e


def test_shipped_totals():
    cards = scorecards()
    assert {c.model: total_score(c) for c in cards} == TOTALS
    assert all(c.evidence for c in cards if c.model == "P-Splines")


def test_uniform_weights_rescale_to_totals():
    ws = weighted_score(scorecards(), {c: 1 for c in CRITERIA})
    assert ws.scores["LR"] == 12 and ws.scores["MLP"] == 0
    # totals already span 0..12, so rescaling is the identity
    assert ws.scores == TOTALS


def test_weighted_scores_match_integer_formula():
    cards = scorecards()
    w = {Criterion(k): v for k, v in ALV.items()}
    raw = {c.model: sum(w.get(k, 0) * r for k, r in c.ratings.items()) for c in cards}
    lo, hi = min(raw.values()), max(raw.values())
    want = {m: (x - lo) * 12 // (hi - lo) for m, x in raw.items()}
    assert weighted_score(cards, ALV).scores == want


def test_pattern_gams_outscore_black_boxes():
    cards = {c.model: c for c in scorecards()}
    s = weighted_score(cards.values(), ALV).scores
    pattern = [m for m in GAMS if cards[m].vector()[0] == 2 and cards[m].vector()[2] == 2
               and cards[m].vector()[5] == 2]
    assert pattern
    assert min(s[m] for m in pattern) > max(s[m] for m in BLACK_BOX)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=6, max_size=6), st.integers(1, 9))
def test_weight_scale_invariance(weights, k):
    if not any(weights):
        return
    cards = scorecards()
    w = dict(zip(CRITERIA, weights))
    a = weighted_score(cards, w)
    b = weighted_score(cards, {c: k * v for c, v in w.items()})
    assert a.scores == b.scores
    assert 0 <= min(a.scores.values()) and max(a.scores.values()) <= 12


def test_float_weights_read_exactly():
    cards = scorecards()
    a = weighted_score(cards, {"Additivity": 0.1, "Linearity": 0.2})
    b = weighted_score(cards, {"Additivity": 1, "Linearity": 2})
    assert a.scores == b.scores


def test_degenerate_and_invalid_weights():
    cards = [Scorecard(m, {c: 1 for c in CRITERIA}) for m in ("a", "b")]
    ws = weighted_score(cards, {c: 1 for c in CRITERIA})
    assert ws.degenerate and ws.scores == {"a": 0, "b": 0}
    assert total_score(cards[0]) == 6
    with pytest.raises(ValueError):
        weighted_score(cards, {"Additivity": -1})
    with pytest.raises(ValueError):
        weighted_score(cards, {"Additivity": 0})
    with pytest.raises(ValueError):
        weighted_score(cards[:1], {"Additivity": 1})


def test_scorecard_validation():
    with pytest.raises(ValueError, match="unrated"):
        Scorecard("m", {"Additivity": 1})
    with pytest.raises(ValueError):
        Scorecard("m", {c: 3 for c in CRITERIA})


def test_perfect_agreement_is_one():
    sheet = default_sheet()
    two = pd.concat([sheet, sheet.assign(rater="second")], ignore_index=True)
    assert krippendorff_alpha(two) == 1.0
    rng = np.random.default_rng(0)
    a = rng.integers(0, 3, (1, 14, 6)).astype(float)
    assert krippendorff_alpha(np.repeat(a, 4, axis=0)) == 1.0


def test_random_ratings_give_alpha_near_zero():
    rng = np.random.default_rng(12345)
    sheets = rng.integers(0, 3, (3, 10_000, 6)).astype(float)
    assert abs(krippendorff_alpha(sheets)) < 0.05


def test_two_rater_example_matches_pair_oracle():
    A = [2, 1, 0, 2, 2, 1, 0, 0, 2, 1, None, 2]
    B = [2, 1, 1, 2, 1, 1, 0, 2, 2, 0, 1, None]
    arr = np.array([[np.nan if v is None else v for v in r] for r in (A, B)])
    for level in ("ordinal", "nominal", "interval"):
        assert abs(krippendorff_alpha(arr, level) - float(brute_alpha([A, B], level))) <= 1e-12


def test_textbook_worked_examples():
    # reliability data with missing values from Krippendorff's computing notes
    n = None
    rows = [[1, 2, 3, 3, 2, 1, 4, 1, 2, n, n, n], [1, 2, 3, 3, 2, 2, 4, 1, 2, 5, n, 3],
            [n, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, n], [1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, n]]
    arr = np.array([[np.nan if v is None else v for v in r] for r in rows])
    for level, want in (("nominal", 0.743), ("ordinal", 0.815), ("interval", 0.849)):
        got = krippendorff_alpha(arr, level)
        assert round(got, 3) == want
        assert abs(got - float(brute_alpha(rows, level))) <= 1e-12
    binary = np.array([[0, 1, 0, 0, 0, 0, 0, 0, 1, 0], [1, 1, 1, 0, 0, 1, 0, 0, 0, 0]])
    assert round(krippendorff_alpha(binary, "nominal"), 3) == 0.095


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_alpha_matches_oracle_and_rater_symmetry(seed):
    rng = np.random.default_rng(seed)
    R, U = int(rng.integers(2, 5)), int(rng.integers(3, 15))
    a = rng.integers(0, 3, (R, U)).astype(float)
    a[rng.uniform(size=a.shape) < 0.15] = np.nan
    rows = [[None if np.isnan(v) else int(v) for v in r] for r in a]
    pairable = sum(sum(v is not None for v in col) >= 2 for col in zip(*rows))
    values = {v for r in rows for v in r if v is not None}
    if pairable == 0 or len(values) < 2:
        return
    try:
        oracle = float(brute_alpha(rows))
    except ZeroDivisionError:
        return
    got = krippendorff_alpha(a)
    assert abs(got - oracle) <= 1e-12
    assert abs(krippendorff_alpha(a[rng.permutation(R)]) - got) <= 1e-12


def test_alpha_errors():
    with pytest.raises(ValueError):
        krippendorff_alpha(np.zeros((1, 5)))
    with pytest.raises(ValueError):
        krippendorff_alpha(np.zeros((2, 5)), level="ratio")


def test_read_sheet(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("rater,model,criterion,rating\nr1,m,Additivity,2\nr1,m,Sparsity,\n")
    s = read_sheet(p)
    assert np.isnan(s["rating"].iloc[1])
    with pytest.raises(ValueError, match="missing ratings"):
        scorecards(s, rater="r1")
    for body, match in (("rater,model,criterion,rating\nr,m,Speed,1\n", "line 2: unknown"),
                        ("rater,model,criterion,rating\nr,m,Additivity,3\n", "line 2: rating"),
                        ("rater,model,criterion,rating\nr,m,Additivity,1\nr,m,Additivity,2\n",
                         "line 3: duplicate"),
                        ("rater,model,rating\n", "missing column")):
        p.write_text(body)
        with pytest.raises(ValueError, match=match):
            read_sheet(p)


def test_read_weights(tmp_path):
    p = tmp_path / "w.yaml"
    p.write_text("Additivity: 10\nLinearity: 2.5\n")
    assert read_weights(p) == {Criterion.ADDITIVITY: 10, Criterion.LINEARITY: 2.5}


def test_evidence_refers_to_known_cells():
    ev = default_evidence()
    assert set(ev["model"]) <= set(TOTALS)
    assert all(Criterion(c) for c in ev["criterion"])


def test_tradeoff_table():
    t = tradeoff_table({"a": Fraction(1), "b": Fraction(2)}, {"a": 3, "b": 7})
    assert t.to_dict("list") == {"model": ["a", "b"], "performance": [2.0, 1.0],
                                 "interpretability": [3, 7]}
    with pytest.raises(ValueError):
        tradeoff_table({"a": 1}, {"b": 1})
