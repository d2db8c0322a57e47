"""Interpretability scorecards, re-weighted scores and rater agreement.

Ratings are data: each model gets 0, 1 or 2 points on six criteria (2 when
the property holds by default, 1 when a setting enables it, 0 otherwise).
The shipped sheet holds the consensus ratings of fourteen model families.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

RATING_LEVELS = (0, 1, 2)
SHEET_COLUMNS = ("rater", "model", "criterion", "rating")


class Criterion(str, enum.Enum):
    ADDITIVITY = "Additivity"
    SPARSITY = "Sparsity"
    LINEARITY = "Linearity"
    SMOOTHNESS = "Smoothness"
    MONOTONICITY = "Monotonicity"
    VISUALIZABILITY = "Visualizability"


CRITERIA = tuple(Criterion)


@dataclass
class Scorecard:
    """Ratings of one model on every criterion, with optional evidence notes."""

    model: str
    ratings: dict[Criterion, int]
    evidence: dict[Criterion, str] = field(default_factory=dict)

    def __post_init__(self):
        ratings = {Criterion(k): v for k, v in self.ratings.items()}
        missing = [c.value for c in CRITERIA if c not in ratings]
        if missing:
            raise ValueError(f"{self.model}: unrated criteria {missing}")
        for c, v in ratings.items():
            if v not in RATING_LEVELS:
                raise ValueError(f"{self.model}: rating {v!r} for {c.value} is not 0, 1 or 2")
        self.ratings = {c: int(ratings[c]) for c in CRITERIA}
        self.evidence = {Criterion(k): v for k, v in self.evidence.items()}

    def vector(self) -> tuple[int, ...]:
        return tuple(self.ratings[c] for c in CRITERIA)


def total_score(card: Scorecard) -> int:
    return sum(card.ratings.values())


# ---------------------------------------------------------------------------
# Sheets
# ---------------------------------------------------------------------------

def read_sheet(path) -> pd.DataFrame:
    """Rater sheet with columns ``rater, model, criterion, rating``.

    An empty rating cell is a missing rating.
    """
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    absent = [c for c in SHEET_COLUMNS if c not in df.columns]
    if absent:
        raise ValueError(f"{path}: missing column(s) {absent}")
    out = df[list(SHEET_COLUMNS)].copy()
    ratings = []
    for i, (crit, r) in enumerate(zip(out["criterion"], out["rating"])):
        try:
            Criterion(crit)
        except ValueError:
            raise ValueError(f"{path}: line {i + 2}: unknown criterion {crit!r}") from None
        if r.strip() == "":
            ratings.append(np.nan)
            continue
        if r.strip() not in ("0", "1", "2"):
            raise ValueError(f"{path}: line {i + 2}: rating {r!r} is not 0, 1 or 2")
        ratings.append(float(r))
    out["rating"] = ratings
    dup = out.duplicated(["rater", "model", "criterion"])
    if dup.any():
        i = int(np.flatnonzero(dup.to_numpy())[0])
        raise ValueError(f"{path}: line {i + 2}: duplicate rating")
    return out


def _data_file(name: str):
    return resources.files("gamlab").joinpath("data", name)


def default_sheet() -> pd.DataFrame:
    """The shipped consensus ratings."""
    with resources.as_file(_data_file("ratings_consensus.csv")) as p:
        return read_sheet(p)


def default_evidence() -> pd.DataFrame:
    with resources.as_file(_data_file("ratings_evidence.csv")) as p:
        return pd.read_csv(p, dtype=str, keep_default_na=False)


def scorecards(sheet: pd.DataFrame | None = None, evidence: pd.DataFrame | None = None,
               rater: str | None = None) -> list[Scorecard]:
    """Scorecards from one rater of a sheet, in sheet order of models."""
    sheet = default_sheet() if sheet is None else sheet
    if evidence is None and sheet is not None:
        evidence = default_evidence() if rater in (None, "consensus") else None
    raters = list(dict.fromkeys(sheet["rater"]))
    rater = rater if rater is not None else raters[0]
    if rater not in raters:
        raise ValueError(f"unknown rater {rater!r}; sheet has {raters}")
    s = sheet[sheet["rater"] == rater]
    if s["rating"].isna().any():
        raise ValueError(f"rater {rater!r} has missing ratings")
    notes: dict[str, dict] = {}
    if evidence is not None:
        for m, c, e in evidence[["model", "criterion", "evidence"]].itertuples(index=False):
            notes.setdefault(m, {})[Criterion(c)] = e
    cards = []
    for model in dict.fromkeys(s["model"]):
        g = s[s["model"] == model]
        cards.append(Scorecard(model, {Criterion(c): int(r) for c, r in
                                       zip(g["criterion"], g["rating"])},
                               notes.get(model, {})))
    return cards


# ---------------------------------------------------------------------------
# Weighted scores
# ---------------------------------------------------------------------------

def _exact(w) -> Fraction:
    if isinstance(w, (Fraction, int)):
        return Fraction(w)
    return Fraction(str(w))


@dataclass
class WeightedScores:
    scores: dict[str, int]
    raw: dict[str, Fraction]
    degenerate: bool


def weighted_score(cards: Iterable[Scorecard], weights: Mapping) -> WeightedScores:
    """Weighted sums rescaled to integers on 0..12.

    ``x' = floor((x - min) / (max - min) * 12)`` evaluated exactly; floats in
    ``weights`` are read through their decimal representation.  When every
    raw score is equal the result is all zeros with ``degenerate`` set.
    """
    cards = list(cards)
    if len(cards) < 2:
        raise ValueError("rescaling needs at least two models")
    w = {Criterion(k): _exact(v) for k, v in weights.items()}
    w = {c: w.get(c, Fraction(0)) for c in CRITERIA}
    if any(v < 0 for v in w.values()):
        raise ValueError("weights must be non-negative")
    if not any(v > 0 for v in w.values()):
        raise ValueError("at least one weight must be positive")
    raw = {card.model: sum((w[c] * card.ratings[c] for c in CRITERIA), Fraction(0))
           for card in cards}
    lo, hi = min(raw.values()), max(raw.values())
    if lo == hi:
        return WeightedScores({m: 0 for m in raw}, raw, True)
    scores = {m: math.floor((x - lo) / (hi - lo) * 12) for m, x in raw.items()}
    return WeightedScores(scores, raw, False)


def read_weights(path) -> dict[Criterion, float]:
    """Weights from a YAML/JSON mapping of criterion name to weight."""
    import yaml
    with open(path, encoding="utf-8") as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise ValueError(f"{path}: weights must be a mapping")
    return {Criterion(k): v for k, v in d.items()}


# ---------------------------------------------------------------------------
# Krippendorff's alpha
# ---------------------------------------------------------------------------

def _reliability_matrix(sheets) -> np.ndarray:
    """Raters x units matrix with ``nan`` for missing ratings."""
    if isinstance(sheets, pd.DataFrame):
        df = sheets.copy()
        df["unit"] = list(zip(df["model"], df["criterion"]))
        wide = df.pivot(index="rater", columns="unit", values="rating")
        return wide.to_numpy(dtype=float)
    a = np.asarray(sheets, dtype=float)
    if a.ndim == 3:  # raters x models x criteria
        a = a.reshape(a.shape[0], -1)
    if a.ndim != 2:
        raise ValueError("sheets must be a frame or a raters x units array")
    return a


def _distance(values: np.ndarray, totals: np.ndarray, level: str) -> np.ndarray:
    v = values.astype(float)
    if level == "nominal":
        return (v[:, None] != v[None, :]).astype(float)
    if level == "interval":
        return (v[:, None] - v[None, :]) ** 2
    # ordinal: (sum of marginals from c to k, minus half the two ends)^2
    cum = np.concatenate([[0.0], np.cumsum(totals)])
    i = np.arange(len(v))
    lo, hi = np.minimum.outer(i, i), np.maximum.outer(i, i)
    s = cum[hi + 1] - cum[lo] - (totals[lo] + totals[hi]) / 2.0
    return s ** 2


def coincidence_matrix(matrix: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``o[c, k]``: pairable value pairs, each unit weighted by 1 / (m_u - 1)."""
    R, U = matrix.shape
    counts = np.zeros((U, len(values)))
    for j, v in enumerate(values):
        counts[:, j] = (matrix == v).sum(axis=0)
    m = counts.sum(axis=1)
    keep = m >= 2
    counts, m = counts[keep], m[keep]
    o = (counts[:, :, None] * counts[:, None, :]
         - np.einsum("uc,ck->uck", counts, np.eye(len(values))))
    return (o / (m - 1)[:, None, None]).sum(axis=0)


def krippendorff_alpha(sheets, level: str = "ordinal") -> float:
    """Krippendorff's alpha over units = (model, criterion) pairs.

    ``sheets`` is a long rater sheet, a raters x units array or a raters x
    models x criteria array (``nan`` = missing).  Units with fewer than two
    ratings are ignored.  When all pairable ratings agree within every unit
    the result is 1.0.
    """
    if level not in ("ordinal", "nominal", "interval"):
        raise ValueError("level must be ordinal, nominal or interval")
    a = _reliability_matrix(sheets)
    if a.shape[0] < 2:
        raise ValueError("alpha needs at least two raters")
    observed = a[~np.isnan(a)]
    values = np.unique(observed)
    o = coincidence_matrix(a, values)
    n_c = o.sum(axis=1)
    n = n_c.sum()
    if n < 2:
        raise ValueError("alpha needs at least two pairable ratings")
    d = _distance(values, n_c, level)
    d_o = float((o * d).sum())
    if d_o == 0.0:
        return 1.0
    d_e = float((np.outer(n_c, n_c) * d).sum()) / (n - 1)
    return 1.0 - d_o / d_e


# ---------------------------------------------------------------------------
# Performance-interpretability summary
# ---------------------------------------------------------------------------

def tradeoff_table(ranks, scores: Mapping[str, float], group: str = "total") -> pd.DataFrame:
    """Performance score ``(M + 1) - average rank`` next to interpretability.

    ``ranks`` is a :class:`~gamlab.metrics.RankTable` or a mapping of model to
    average rank over ``M`` models.  Rows are sorted by model name.
    """
    avg = ranks.average[group] if hasattr(ranks, "average") else dict(ranks)
    if set(avg) != set(scores):
        raise ValueError(f"model sets differ: only ranked {sorted(set(avg) - set(scores))}, "
                         f"only scored {sorted(set(scores) - set(avg))}")
    M = len(avg)
    rows = [{"model": m, "performance": float(M + 1 - Fraction(avg[m])),
             "interpretability": scores[m]} for m in sorted(avg)]
    return pd.DataFrame(rows, columns=["model", "performance", "interpretability"])
