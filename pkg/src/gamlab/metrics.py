"""Evaluation metrics and cross-dataset average-rank aggregation."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from importlib import resources
from typing import Iterable, Mapping

import numpy as np
import pandas as pd
from scipy.stats import rankdata
from sklearn import metrics as skm

from .core import TaskKind

log = logging.getLogger(__name__)

CLASSIFICATION_THRESHOLD = 0.5


def auroc(labels, scores) -> float:
    """Area under the ROC curve in Mann-Whitney form.

    Equals the share of (positive, negative) pairs where the positive scores
    higher, counting ties as one half.  Runs in ``O(n log n)`` via midranks.
    """
    y = np.asarray(labels, dtype=float).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    if y.shape != s.shape:
        raise ValueError(f"labels and scores differ in length ({len(y)} vs {len(s)})")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0/1")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes")
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def rmse(y, yhat) -> float:
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if len(y) == 0 or y.shape != yhat.shape:
        raise ValueError("rmse needs two non-empty vectors of equal length")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def primary_metric(task, y, prediction) -> float:
    """AUROC on probabilities for classification, RMSE otherwise."""
    if TaskKind(task) is TaskKind.CLASSIFICATION:
        return auroc(y, prediction)
    return rmse(y, prediction)


def higher_is_better(task) -> bool:
    return TaskKind(task) is TaskKind.CLASSIFICATION


def secondary_metrics(task, y, prediction) -> dict[str, float]:
    """Threshold metrics (classification) or error summaries (regression).

    For classification ``prediction`` is the probability of class 1, cut at
    0.5.  An undefined precision (no positive predictions) is reported as 0
    and flagged by ``precision_undefined = 1.0``.
    """
    y = np.asarray(y, dtype=float).ravel()
    p = np.asarray(prediction, dtype=float).ravel()
    if TaskKind(task) is TaskKind.CLASSIFICATION:
        yhat = (p >= CLASSIFICATION_THRESHOLD).astype(int)
        yt = y.astype(int)
        out = {
            "accuracy": skm.accuracy_score(yt, yhat),
            "precision": skm.precision_score(yt, yhat, zero_division=0),
            "recall": skm.recall_score(yt, yhat, zero_division=0),
            "f1": skm.f1_score(yt, yhat, zero_division=0),
            "f1_macro": skm.f1_score(yt, yhat, average="macro", labels=[0, 1],
                                     zero_division=0),
            "f1_weighted": skm.f1_score(yt, yhat, average="weighted", labels=[0, 1],
                                        zero_division=0),
            "precision_undefined": float(yhat.sum() == 0),
        }
    else:
        out = {
            "mse": skm.mean_squared_error(y, p),
            "mae": skm.mean_absolute_error(y, p),
            "r2": skm.r2_score(y, p) if np.ptp(y) > 0 else 0.0,
            "explained_variance": skm.explained_variance_score(y, p) if np.ptp(y) > 0 else 0.0,
            "max_error": skm.max_error(y, p),
        }
    return {k: float(v) for k, v in out.items()}


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------

TIE_POLICIES = ("average", "name")


def _rank_one(means: Mapping[str, float], stds: Mapping[str, float], higher_better: bool,
              std_tiebreak: bool, ties: str) -> dict[str, Fraction]:
    """Ranks ``1..M`` of the models of one dataset.

    Models are ordered by mean (then by lower std when ``std_tiebreak``).
    Models still tied share the average of their positions (``ties="average"``)
    or are ordered by name (``ties="name"``).
    """
    sign = -1.0 if higher_better else 1.0

    def key(m):
        k = (sign * means[m],)
        return k + (stds[m],) if std_tiebreak else k

    ordered = sorted(means, key=lambda m: (key(m), m))
    ranks: dict[str, Fraction] = {}
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and key(ordered[j + 1]) == key(ordered[i]):
            j += 1
        for k in range(i, j + 1):
            if ties == "average":
                ranks[ordered[k]] = Fraction(i + j + 2, 2)
            else:
                ranks[ordered[k]] = Fraction(k + 1)
        i = j + 1
    return ranks


def round_half_up(value, digits: int = 2) -> Decimal:
    """Decimal rounding with halves away from zero, applied to an exact value."""
    if isinstance(value, Fraction):
        d = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        d = Decimal(str(value))
    return d.quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_UP)


@dataclass
class RankTable:
    """Per-dataset ranks and per-model average ranks.

    ``ranks`` maps ``(group, dataset) -> {model: rank}``; ``average`` maps a
    group (``"classification"``, ``"regression"`` or ``"total"``) to
    ``{model: average rank}`` as exact fractions.
    """

    cells: pd.DataFrame
    ranks: dict[tuple[str, str], dict[str, Fraction]]
    average: dict[str, dict[str, Fraction]]
    models: list[str]

    def average_rank(self, model: str, group: str = "total") -> Fraction:
        return self.average[group][model]

    def rounded(self, group: str = "total", digits: int = 2) -> dict[str, Decimal]:
        return {m: round_half_up(v, digits) for m, v in self.average[group].items()}

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for (group, ds), r in self.ranks.items():
            for m in self.models:
                cell = self.cells[(self.cells.dataset == ds) & (self.cells.model == m)]
                rows.append({"group": group, "dataset": ds, "model": m,
                             "mean": float(cell["mean"].iloc[0]),
                             "std": float(cell["std"].iloc[0]), "rank": float(r[m])})
        for group, avg in self.average.items():
            for m in self.models:
                rows.append({"group": group, "dataset": "AVERAGE", "model": m,
                             "mean": np.nan, "std": np.nan, "rank": float(avg[m])})
        return pd.DataFrame(rows)

    def to_csv(self, path=None) -> str:
        text = self.to_frame().to_csv(index=False, float_format="%.6g", lineterminator="\n")
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_text(self, digits: int = 3) -> str:
        """Aligned table; ``*`` marks rank 1 within a dataset and ``_`` marks rank 2."""
        buf = io.StringIO()
        width = max(10, max(len(m) for m in self.models) + 2)
        cell_w = 2 * digits + 8
        buf.write(f"{'group':<15}{'dataset':<14}"
                  + "".join(f"{m:>{max(width, cell_w)}}" for m in self.models) + "\n")
        for (group, ds), r in self.ranks.items():
            line = f"{group:<15}{ds:<14}"
            for m in self.models:
                c = self.cells[(self.cells.dataset == ds) & (self.cells.model == m)].iloc[0]
                mark = "*" if r[m] == 1 else ("_" if r[m] == 2 else " ")
                txt = f"{c['mean']:.{digits}f}±{c['std']:.{digits}f}{mark}"
                line += f"{txt:>{max(width, cell_w)}}"
            buf.write(line + "\n")
        for group, avg in self.average.items():
            line = f"{'avg rank':<15}{group:<14}"
            for m in self.models:
                line += f"{str(round_half_up(avg[m])):>{max(width, cell_w)}}"
            buf.write(line + "\n")
        return buf.getvalue()


def rank_models(cells: pd.DataFrame, task=None, std_tiebreak: bool | Mapping[str, bool] = True,
                ties: str = "average", models: Iterable[str] | None = None) -> RankTable:
    """Average ranks across datasets.

    Parameters
    ----------
    cells : DataFrame
        Columns ``dataset, model, mean, std`` and, unless ``task`` is given,
        ``task``.  One row per (dataset, model).
    task : TaskKind, optional
        Rank a single task group.  Otherwise both groups are ranked and a
        ``"total"`` average (mean of the two group averages) is added.
    std_tiebreak : bool or mapping, default True
        Break exact mean ties by the lower std.  A mapping from task value
        to bool sets it per task group.
    ties : {"average", "name"}
        Handling of models tied on every key: shared average rank, or
        ordered by model name.
    """
    if ties not in TIE_POLICIES:
        raise ValueError(f"ties must be one of {TIE_POLICIES}")
    df = cells.copy()
    if task is not None:
        df["task"] = TaskKind(task).value
    if "task" not in df.columns:
        raise ValueError("cells need a task column when task is not given")
    missing_cols = {"dataset", "model", "mean", "std"} - set(df.columns)
    if missing_cols:
        raise ValueError(f"cells lack column(s) {sorted(missing_cols)}")
    dup = df.duplicated(["dataset", "model"])
    if dup.any():
        raise ValueError(f"duplicate cells: {df.loc[dup, ['dataset', 'model']].values.tolist()}")
    model_list = list(models) if models is not None else list(dict.fromkeys(df["model"]))
    ranks: dict[tuple[str, str], dict[str, Fraction]] = {}
    average: dict[str, dict[str, Fraction]] = {}
    absent = []
    for group in (TaskKind.CLASSIFICATION.value, TaskKind.REGRESSION.value):
        g = df[df["task"] == group]
        if g.empty:
            continue
        datasets = list(dict.fromkeys(g["dataset"]))
        for ds in datasets:
            d = g[g["dataset"] == ds].set_index("model")
            for m in model_list:
                if m not in d.index:
                    absent.append((ds, m))
            if absent:
                continue
            means = {m: float(d.loc[m, "mean"]) for m in model_list}
            stds = {m: float(d.loc[m, "std"]) for m in model_list}
            use_std = (std_tiebreak.get(group, True) if isinstance(std_tiebreak, Mapping)
                       else bool(std_tiebreak))
            ranks[(group, ds)] = _rank_one(means, stds, higher_is_better(group),
                                           use_std, ties)
        if absent:
            continue
        average[group] = {m: sum((ranks[(group, ds)][m] for ds in datasets), Fraction(0))
                          / len(datasets) for m in model_list}
    if absent:
        raise ValueError(f"missing (dataset, model) cells: {absent}")
    if len(average) == 2:
        cls, reg = average[TaskKind.CLASSIFICATION.value], average[TaskKind.REGRESSION.value]
        average["total"] = {m: (cls[m] + reg[m]) / 2 for m in model_list}
    return RankTable(cells=df, ranks=ranks, average=average, models=model_list)


def summarize_folds(folds: pd.DataFrame) -> pd.DataFrame:
    """Mean and (population) std of the primary metric per (task, dataset, model)."""
    g = folds.groupby(["task", "dataset", "model"], sort=False)["value"]
    out = g.agg(mean="mean", std=lambda v: float(np.std(v)), n_folds="count").reset_index()
    return out


REFERENCE_TABLES = {"default": "benchmark_default.csv", "tuned": "benchmark_tuned.csv"}


def reference_cells(setting: str = "default") -> pd.DataFrame:
    """Bundled benchmark results (``task, dataset, model, mean, std``).

    ``setting`` is ``"default"`` (untuned hyperparameters) or ``"tuned"``.
    """
    if setting not in REFERENCE_TABLES:
        raise ValueError(f"setting must be one of {sorted(REFERENCE_TABLES)}")
    with resources.as_file(resources.files("gamlab").joinpath(
            "data", REFERENCE_TABLES[setting])) as p:
        return pd.read_csv(p)
