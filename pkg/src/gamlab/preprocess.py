"""Dataset-agnostic preprocessing.

:func:`fit_plan` learns every statistic from the fit data only and
:func:`apply_plan` replays it, so the same plan can be applied to a held-out
fold without leaking information.  The steps, in order:

* drop explicitly listed columns (ids, leakage);
* drop rows without a target or with every feature missing;
* drop columns with more than half of their values missing;
* impute numeric medians, encode missing categoricals as level ``"NA"``;
* drop categoricals with more than 25 distinct values;
* one-hot encode the remaining categoricals (every level kept);
* standardize numerics (and the regression target);
* map the binary target to {0, 1}.
"""

from __future__ import annotations

import gzip
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import yaml
from sklearn.base import BaseEstimator, TransformerMixin

from .core import Column, ColumnKind, Dataset, TaskKind

log = logging.getLogger(__name__)

DEFAULT_MISSING_TOKENS = ("", "NA", "nan")
NA_LEVEL = "NA"
MAX_MISSING_FRACTION = 0.5
MAX_LEVELS = 25


class PreprocessError(ValueError):
    pass


@dataclass
class PreprocessPlan:
    """Fitted preprocessing statistics; JSON round-trippable."""

    target: str
    task: str
    dropped_columns: list[tuple[str, str]] = field(default_factory=list)
    numeric_columns: list[str] = field(default_factory=list)
    numeric_medians: dict[str, float] = field(default_factory=dict)
    numeric_means: dict[str, float] = field(default_factory=dict)
    numeric_stds: dict[str, float] = field(default_factory=dict)
    categorical_levels: dict[str, list[str]] = field(default_factory=dict)
    column_order: list[str] = field(default_factory=list)
    target_mean: float | None = None
    target_std: float | None = None

    @property
    def output_columns(self) -> list[str]:
        out = []
        for name in self.column_order:
            if name in self.categorical_levels:
                out.extend(indicator_name(name, lv) for lv in self.categorical_levels[name])
            else:
                out.append(name)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dropped_columns"] = [list(p) for p in self.dropped_columns]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessPlan":
        d = dict(d)
        d["dropped_columns"] = [tuple(p) for p in d.get("dropped_columns", [])]
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "PreprocessPlan":
        return cls.from_dict(json.loads(text))


def indicator_name(column: str, level: str) -> str:
    return f"{column}={level}"


def _present_rows(raw: Dataset) -> np.ndarray:
    """Rows with a target and at least one observed feature."""
    keep = ~np.isnan(raw.target)
    if raw.columns:
        all_missing = np.all([c.missing_mask() for c in raw.columns], axis=0)
        keep &= ~all_missing
    return keep


def clean_rows(raw: Dataset) -> Dataset:
    """Drop rows with no target or with every feature missing."""
    keep = _present_rows(raw)
    if not keep.any():
        raise PreprocessError(f"dataset {raw.name!r} has no usable rows")
    return raw if keep.all() else raw.subset(np.flatnonzero(keep))


def _levels_in_order(values: np.ndarray) -> list[str]:
    seen: dict[str, None] = {}
    for v in values:
        seen.setdefault(NA_LEVEL if v is None else str(v), None)
    return list(seen)


def fit_plan(raw: Dataset, drop_list: Sequence[str] = ()) -> PreprocessPlan:
    """Learn the preprocessing statistics from ``raw``."""
    names = set(raw.feature_names)
    unknown = [c for c in drop_list if c not in names]
    if unknown:
        log.warning("drop list names absent columns %s", unknown)
    data = clean_rows(raw)
    n = data.n_rows
    plan = PreprocessPlan(target=raw.target_name, task=data.task.value)
    explicit = set(drop_list)
    for col in data.columns:
        if col.name in explicit:
            plan.dropped_columns.append((col.name, "explicit"))
            continue
        missing = col.missing_mask()
        if missing.sum() > MAX_MISSING_FRACTION * n:
            plan.dropped_columns.append((col.name, "too-missing"))
            continue
        if col.kind is ColumnKind.CATEGORICAL:
            levels = _levels_in_order(col.values)
            if len(levels) > MAX_LEVELS:
                plan.dropped_columns.append((col.name, "high-cardinality"))
                continue
            plan.categorical_levels[col.name] = levels
        else:
            observed = col.values[~missing]
            median = float(np.median(observed))
            filled = np.where(missing, median, col.values)
            std = float(np.std(filled))
            if not std > 0:
                plan.dropped_columns.append((col.name, "constant"))
                continue
            plan.numeric_columns.append(col.name)
            plan.numeric_medians[col.name] = median
            plan.numeric_means[col.name] = float(np.mean(filled))
            plan.numeric_stds[col.name] = std
        plan.column_order.append(col.name)
    if not plan.column_order:
        raise PreprocessError(f"every column of {raw.name!r} was dropped")
    if data.task is TaskKind.REGRESSION:
        plan.target_mean = float(np.mean(data.target))
        plan.target_std = float(np.std(data.target))
        if not plan.target_std > 0:
            raise PreprocessError("regression target is constant")
    return plan


def apply_plan(plan: PreprocessPlan, raw: Dataset) -> Dataset:
    """Transform ``raw`` with the statistics stored in ``plan``."""
    if raw.target_name != plan.target:
        raise PreprocessError(
            f"target column {plan.target!r} is absent (dataset has {raw.target_name!r})")
    present = raw.feature_names
    if plan.categorical_levels and present == plan.output_columns:
        # indicator names never occur in raw data, so this input is already encoded
        return raw
    missing_cols = [c for c in plan.column_order if c not in present]
    if missing_cols:
        raise PreprocessError(f"input lacks planned column(s) {missing_cols}")
    dropped = {name for name, _ in plan.dropped_columns}
    extra = [c for c in present if c not in plan.column_order and c not in dropped]
    if extra:
        log.warning("ignoring column(s) unknown to the plan: %s", extra)

    data = clean_rows(raw)
    cols: list[Column] = []
    for name in plan.column_order:
        col = data.column(name)
        if name in plan.categorical_levels:
            if col.kind is not ColumnKind.CATEGORICAL:
                raise PreprocessError(f"column {name!r} was categorical when the plan was fit")
            labels = np.array([NA_LEVEL if v is None else str(v) for v in col.values],
                              dtype=object)
            for level in plan.categorical_levels[name]:
                cols.append(Column(indicator_name(name, level), ColumnKind.NUMERIC,
                                   (labels == level).astype(float), source=name, level=level))
        else:
            if col.kind is not ColumnKind.NUMERIC:
                raise PreprocessError(f"column {name!r} was numeric when the plan was fit")
            v = np.where(np.isnan(col.values), plan.numeric_medians[name], col.values)
            v = (v - plan.numeric_means[name]) / plan.numeric_stds[name]
            cols.append(Column(name, ColumnKind.NUMERIC, v))
    y = data.target
    if plan.task == TaskKind.REGRESSION.value:
        y = (y - plan.target_mean) / plan.target_std
    return Dataset(name=data.name, columns=cols, target=y, task=data.task,
                   target_name=data.target_name, row_ids=data.row_ids)


def fit_apply(raw: Dataset, drop_list: Sequence[str] = ()) -> tuple[PreprocessPlan, Dataset]:
    plan = fit_plan(raw, drop_list)
    return plan, apply_plan(plan, raw)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

@dataclass
class DatasetDescriptor:
    """What is needed to turn a CSV file into a raw :class:`Dataset`."""

    name: str
    path: str
    target: str
    task: str
    drop: list[str] = field(default_factory=list)
    categorical: list[str] = field(default_factory=list)
    positive_label: str | None = None
    missing_tokens: list[str] = field(default_factory=lambda: list(DEFAULT_MISSING_TOKENS))
    sep: str | None = None

    def __post_init__(self):
        self.task = TaskKind(self.task).value


def load_descriptor(path) -> DatasetDescriptor:
    """Read a YAML (or JSON) descriptor; ``path`` inside it is file-relative."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise PreprocessError(f"descriptor {path} must be a mapping")
    absent = [k for k in ("path", "target", "task") if k not in d]
    if absent:
        raise PreprocessError(f"descriptor {path} lacks key(s) {absent}")
    d.setdefault("name", path.stem)
    csv = Path(d["path"])
    if not csv.is_absolute():
        d["path"] = str(path.parent / csv)
    if d.get("positive_label") is not None:
        d["positive_label"] = str(d["positive_label"])
    return DatasetDescriptor(**d)


def _header_separator(path) -> str:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8", newline="") as fh:
        header = fh.readline()
    return ";" if header.count(";") > header.count(",") else ","


def read_table(path, missing_tokens: Sequence[str] = DEFAULT_MISSING_TOKENS,
               sep: str | None = None) -> pd.DataFrame:
    """Read a CSV as strings with the missing tokens replaced by ``None``.

    Without ``sep`` the delimiter is ``;`` when the header holds more
    semicolons than commas, else ``,``.
    """
    sep = sep or _header_separator(path)
    df = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, na_filter=False)
    tokens = set(missing_tokens)
    return df.apply(lambda s: s.map(lambda v: None if v.strip() in tokens else v))


def _parse_numeric(values: pd.Series) -> np.ndarray | None:
    out = np.full(len(values), np.nan)
    for i, v in enumerate(values):
        if v is None:
            continue
        try:
            out[i] = float(v)
        except ValueError:
            return None
    if np.isinf(out).any():
        return None
    return out


def _encode_target(values: pd.Series, task: TaskKind, positive_label) -> np.ndarray:
    if task is TaskKind.REGRESSION:
        y = _parse_numeric(values)
        if y is None:
            raise PreprocessError("regression target contains non-numeric values")
        return y
    labels = sorted({str(v).strip() for v in values if v is not None})
    if len(labels) > 2:
        raise PreprocessError(f"binary target has {len(labels)} classes: {labels[:5]}")
    if positive_label is None:
        numeric = _parse_numeric(pd.Series(labels))
        if numeric is not None and set(numeric) <= {0.0, 1.0}:
            positive_label = next((lb for lb in labels if float(lb) == 1.0), None)
        else:
            positive_label = labels[-1]
            log.info("taking %r as the positive class", positive_label)
    return np.array([np.nan if v is None else float(str(v).strip() == positive_label)
                     for v in values])


def frame_to_dataset(df: pd.DataFrame, name: str, target: str, task,
                     categorical: Sequence[str] = (), positive_label=None) -> Dataset:
    """Build a raw dataset from a frame of strings / ``None``.

    Columns parse as numeric when every observed value is a float literal,
    unless listed in ``categorical``.
    """
    task = TaskKind(task)
    if target not in df.columns:
        raise PreprocessError(f"target column {target!r} is absent")
    forced = set(categorical)
    columns = []
    for col in df.columns:
        if col == target:
            continue
        values = df[col]
        num = None if col in forced else _parse_numeric(values)
        if num is not None:
            columns.append(Column(str(col), ColumnKind.NUMERIC, num))
        else:
            cat = np.array([None if v is None else str(v) for v in values], dtype=object)
            columns.append(Column(str(col), ColumnKind.CATEGORICAL, cat))
    y = _encode_target(df[target], task, positive_label)
    return Dataset(name=name, columns=columns, target=y, task=task, target_name=target)


def load_dataset(descriptor: DatasetDescriptor | str | os.PathLike) -> Dataset:
    if not isinstance(descriptor, DatasetDescriptor):
        descriptor = load_descriptor(descriptor)
    df = read_table(descriptor.path, descriptor.missing_tokens, descriptor.sep)
    return frame_to_dataset(df, descriptor.name, descriptor.target, descriptor.task,
                            descriptor.categorical, descriptor.positive_label)


class Preprocessor(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`fit_plan` / :func:`apply_plan`.

    Works on raw :class:`Dataset` objects; :meth:`transform` returns a
    preprocessed :class:`Dataset`.
    """

    def __init__(self, drop=()):
        self.drop = drop

    def fit(self, X: Dataset, y=None):
        self.plan_ = fit_plan(X, list(self.drop))
        return self

    def transform(self, X: Dataset) -> Dataset:
        return apply_plan(self.plan_, X)

    def get_feature_names_out(self, input_features=None):
        return np.array(self.plan_.output_columns, dtype=object)
