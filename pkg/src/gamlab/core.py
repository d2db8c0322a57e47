"""Domain types shared by every model family.

A fitted additive model maps a (preprocessed) feature row to

    g(y_hat) = intercept + sum_i f_i(x_i) + sum_k f_k(x_a, x_b)

where ``g`` is the identity (regression) or logit (binary classification)
link.  Every term is centered on its training data, so the intercept carries
the average prediction and each shape shows deviations from it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.special import expit


class TaskKind(str, enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class LinkKind(str, enum.Enum):
    IDENTITY = "identity"
    LOGISTIC = "logistic"

    @classmethod
    def for_task(cls, task: TaskKind) -> "LinkKind":
        return cls.LOGISTIC if TaskKind(task) is TaskKind.CLASSIFICATION else cls.IDENTITY


class ColumnKind(str, enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class ModelFamily(str, enum.Enum):
    PSPLINE = "pspline"
    TREE_GAM = "tree_gam"
    ELM_GAM = "elm_gam"
    LINEAR = "linear"
    TREE = "tree"


@dataclass
class Column:
    """One feature column.

    Numeric columns hold floats with ``nan`` as the missing marker.
    Categorical columns hold an object array of labels with ``None`` as the
    missing marker.  One-hot indicator columns produced by preprocessing are
    numeric and remember their ``source`` column and ``level``.
    """

    name: str
    kind: ColumnKind
    values: np.ndarray
    source: str | None = None
    level: str | None = None

    def __post_init__(self):
        self.kind = ColumnKind(self.kind)
        if self.kind is ColumnKind.NUMERIC:
            values = np.asarray(self.values, dtype=float)
            if np.isinf(values).any():
                raise ValueError(f"column {self.name!r} contains infinite values")
        else:
            values = np.asarray(self.values, dtype=object)
        if values.ndim != 1:
            raise ValueError(f"column {self.name!r} must be one-dimensional")
        self.values = values

    def __len__(self):
        return len(self.values)

    def missing_mask(self) -> np.ndarray:
        if self.kind is ColumnKind.NUMERIC:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)


@dataclass
class Dataset:
    """Feature columns, target and task kind.

    ``row_ids`` tags every row with its position in the originally loaded
    table; subsetting keeps the tags so fold provenance can be audited.
    """

    name: str
    columns: list[Column]
    target: np.ndarray
    task: TaskKind
    target_name: str = "target"
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        self.task = TaskKind(self.task)
        self.target = np.asarray(self.target, dtype=float)
        n = len(self.target)
        if n < 1:
            raise ValueError("dataset must contain at least one row")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({x for x in names if names.count(x) > 1})
            raise ValueError(f"duplicate column names: {dupes}")
        for c in self.columns:
            if len(c) != n:
                raise ValueError(
                    f"column {c.name!r} has {len(c)} rows, target has {n}")
        observed = self.target[~np.isnan(self.target)]
        if self.task is TaskKind.CLASSIFICATION:
            if not np.isin(observed, (0.0, 1.0)).all():
                raise ValueError("classification targets must be 0 or 1")
        elif not np.isfinite(observed).all():
            raise ValueError("regression targets must be finite")
        if self.row_ids is None:
            self.row_ids = np.arange(n)
        self.row_ids = np.asarray(self.row_ids, dtype=np.int64)
        if len(self.row_ids) != n:
            raise ValueError("row_ids length does not match the number of rows")

    @property
    def n_rows(self) -> int:
        return len(self.target)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(f"dataset {self.name!r} has no column {name!r}")

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            name=self.name,
            columns=[Column(c.name, c.kind, c.values[rows], c.source, c.level)
                     for c in self.columns],
            target=self.target[rows],
            task=self.task,
            target_name=self.target_name,
            row_ids=self.row_ids[rows],
        )

    def matrix(self) -> np.ndarray:
        """Float feature matrix; only valid when every column is numeric."""
        bad = [c.name for c in self.columns if c.kind is not ColumnKind.NUMERIC]
        if bad:
            raise TypeError(f"categorical columns must be encoded first: {bad}")
        if not self.columns:
            return np.empty((self.n_rows, 0))
        return np.column_stack([c.values for c in self.columns])

    def categorical_groups(self) -> dict[str, list[str]]:
        """Indicator column names grouped by their source categorical."""
        groups: dict[str, list[str]] = {}
        for c in self.columns:
            if c.source is not None:
                groups.setdefault(c.source, []).append(c.name)
        return groups

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({c.name: c.values for c in self.columns})


# ---------------------------------------------------------------------------
# Shape representations
# ---------------------------------------------------------------------------

def bspline_design(x: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate all B-spline basis functions of a knot vector at ``x``.

    Uses the triangular Cox-de Boor scheme on the knot span containing each
    point.  Points must lie in ``[knots[degree], knots[-degree-1]]``; the
    right boundary is assigned to the last non-empty span.
    """
    x = np.asarray(x, dtype=float)
    knots = np.asarray(knots, dtype=float)
    n_basis = len(knots) - degree - 1
    lo, hi = knots[degree], knots[n_basis]
    span = np.searchsorted(knots, x, side="right") - 1
    span = np.clip(span, degree, n_basis - 1)
    # right boundary belongs to the last span
    span = np.where(x >= hi, n_basis - 1, span)
    if np.any((x < lo - 1e-12 * max(1.0, abs(lo))) | (x > hi + 1e-12 * max(1.0, abs(hi)))):
        raise ValueError("points outside the basis domain")

    m = len(x)
    # local[:, j] holds N_{span-d+j, d}(x) after degree d
    local = np.zeros((m, degree + 1))
    local[:, 0] = 1.0
    left = np.zeros((m, degree + 1))
    right = np.zeros((m, degree + 1))
    for d in range(1, degree + 1):
        left[:, d] = x - knots[span + 1 - d]
        right[:, d] = knots[span + d] - x
        saved = np.zeros(m)
        for r in range(d):
            denom = right[:, r + 1] + left[:, d - r]
            temp = np.divide(local[:, r], denom, out=np.zeros(m), where=denom != 0)
            local[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, d - r] * temp
        local[:, d] = saved

    out = np.zeros((m, n_basis))
    rows = np.arange(m)
    for j in range(degree + 1):
        out[rows, span - degree + j] = local[:, j]
    return out


@dataclass(frozen=True)
class SplineCurve:
    knots: np.ndarray
    coefficients: np.ndarray
    degree: int

    @property
    def domain(self) -> tuple[float, float]:
        n_basis = len(self.knots) - self.degree - 1
        return float(self.knots[self.degree]), float(self.knots[n_basis])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.domain
        xc = np.clip(x, lo, hi)
        return bspline_design(xc, self.knots, self.degree) @ self.coefficients


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function; bin ``i`` covers ``[edges[i], edges[i+1])``."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.edges) != len(self.values) + 1:
            raise ValueError("step function needs len(edges) == len(values) + 1")

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    def bin_index(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.edges[1:-1], x, side="right")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.values[self.bin_index(x)]


@dataclass(frozen=True)
class PiecewiseLinear:
    x: np.ndarray
    y: np.ndarray

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self.x, self.y)


@dataclass(frozen=True)
class CategoryTable:
    """Contribution per level of a one-hot encoded categorical.

    Evaluated on the indicator columns as ``sum_l indicator_l * value_l``, so
    a row with no active indicator (unseen level) contributes 0.
    """

    levels: tuple[str, ...]
    values: np.ndarray

    def __call__(self, indicators: np.ndarray) -> np.ndarray:
        return np.nan_to_num(indicators, nan=0.0) @ self.values


@dataclass(frozen=True)
class Affine:
    """``slope * x + shift``; the linear-model shape.

    Unlike the other representations it extrapolates; ``domain`` is only the
    training range used for plotting.
    """

    slope: float
    shift: float = 0.0
    domain: tuple[float, float] = (-1.0, 1.0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.slope * np.asarray(x, dtype=float) + self.shift


@dataclass(frozen=True)
class ShapeFunction:
    """Centered univariate contribution of one feature.

    ``columns`` are the model input columns the shape reads: one numeric
    column, or all indicator columns of a categorical source.  ``mean_offset``
    records the constant removed during centering (absorbed by the intercept).
    """

    feature: str
    columns: tuple[str, ...]
    repr: Any
    mean_offset: float = 0.0

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.repr, CategoryTable)

    def evaluate(self, block: np.ndarray) -> np.ndarray:
        """Contribution for an ``(n, len(columns))`` input block."""
        if self.is_categorical:
            return self.repr(block)
        x = block[:, 0]
        missing = np.isnan(x)
        if missing.any():
            out = np.zeros(len(x))
            out[~missing] = self.repr(x[~missing])
            return out
        return self.repr(x)


@dataclass(frozen=True)
class InteractionSurface:
    """Centered pairwise term stored as a 2-D step function."""

    features: tuple[str, str]
    edges: tuple[np.ndarray, np.ndarray]
    values: np.ndarray
    mean_offset: float = 0.0

    def __post_init__(self):
        shape = (len(self.edges[0]) - 1, len(self.edges[1]) - 1)
        if self.values.shape != shape:
            raise ValueError(
                f"interaction grid {self.values.shape} does not match edges {shape}")

    @property
    def name(self) -> str:
        return f"{self.features[0]} x {self.features[1]}"

    def evaluate(self, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
        ia = np.searchsorted(self.edges[0][1:-1], xa, side="right")
        ib = np.searchsorted(self.edges[1][1:-1], xb, side="right")
        out = self.values[ia, ib]
        missing = np.isnan(xa) | np.isnan(xb)
        if missing.any():
            out = np.where(missing, 0.0, out)
        return out


def _as_matrix(X, feature_names: Sequence[str]) -> np.ndarray:
    """Coerce model input to an ``(n, p)`` float matrix in ``feature_names`` order."""
    names = list(feature_names)
    if isinstance(X, Mapping):
        unknown = sorted(set(X) - set(names))
        if unknown:
            raise KeyError(f"unknown feature(s) {unknown}; model uses {names}")
        absent = [n for n in names if n not in X]
        if absent:
            raise KeyError(f"row is missing feature(s) {absent}")
        return np.array([[float(X[n]) for n in names]], dtype=float)
    if isinstance(X, pd.DataFrame):
        absent = [n for n in names if n not in X.columns]
        if absent:
            raise KeyError(f"input is missing feature(s) {absent}")
        return X[names].to_numpy(dtype=float)
    if isinstance(X, Dataset):
        return _as_matrix(X.to_frame(), names)
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != len(names):
        raise ValueError(
            f"expected rows with {len(names)} features {names}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AdditiveModel:
    """A trained GAM: intercept, centered shapes, interaction surfaces, link."""

    intercept: float
    shapes: tuple[ShapeFunction, ...]
    interactions: tuple[InteractionSurface, ...]
    link: LinkKind
    family: ModelFamily
    feature_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "link", LinkKind(self.link))
        object.__setattr__(self, "family", ModelFamily(self.family))
        known = set(self.feature_names)
        for s in self.shapes:
            missing = set(s.columns) - known
            if missing:
                raise ValueError(f"shape {s.feature!r} reads unknown columns {sorted(missing)}")
        # column positions are resolved once; the model is immutable afterwards
        index = {n: i for i, n in enumerate(self.feature_names)}
        object.__setattr__(self, "_index", index)

    @property
    def term_names(self) -> list[str]:
        return (["intercept"] + [s.feature for s in self.shapes]
                + [t.name for t in self.interactions])

    def contributions(self, X) -> np.ndarray:
        """Per-term contributions, shape ``(n, 1 + n_shapes + n_interactions)``.

        Column 0 is the intercept; the columns follow :attr:`term_names`.
        """
        A = _as_matrix(X, self.feature_names)
        idx = self._index
        cols = [np.full(len(A), self.intercept)]
        for s in self.shapes:
            cols.append(s.evaluate(A[:, [idx[c] for c in s.columns]]))
        for t in self.interactions:
            cols.append(t.evaluate(A[:, idx[t.features[0]]], A[:, idx[t.features[1]]]))
        return np.column_stack(cols)

    def explain(self, row) -> list[tuple[str, float]]:
        """``(term, contribution)`` pairs for a single row."""
        c = self.contributions(row)
        if c.shape[0] != 1:
            raise ValueError("explain() takes exactly one row")
        return list(zip(self.term_names, c[0].tolist()))

    def predict_raw(self, X) -> np.ndarray:
        return self.contributions(X).sum(axis=1)

    def predict(self, X) -> np.ndarray:
        raw = self.predict_raw(X)
        if self.link is LinkKind.LOGISTIC:
            return expit(raw)
        return raw

    def shape(self, feature: str) -> ShapeFunction:
        for s in self.shapes:
            if s.feature == feature:
                return s
        raise KeyError(f"model has no shape for {feature!r}")


def predict_raw(model, row) -> np.ndarray:
    return model.predict_raw(row)


def contributions(model: AdditiveModel, row) -> list[tuple[str, float]]:
    return model.explain(row)


def center_shapes(shapes, interactions, X: np.ndarray, feature_names):
    """Center every term on ``X``; returns new terms and the total offset removed."""
    index = {n: i for i, n in enumerate(feature_names)}
    new_shapes, new_inter = [], []
    total = 0.0
    for s in shapes:
        vals = s.evaluate(X[:, [index[c] for c in s.columns]])
        off = float(np.mean(vals))
        total += off
        new_shapes.append(ShapeFunction(
            s.feature, s.columns, shift_repr(s.repr, -off), s.mean_offset + off))
    for t in interactions:
        vals = t.evaluate(X[:, index[t.features[0]]], X[:, index[t.features[1]]])
        off = float(np.mean(vals))
        total += off
        new_inter.append(InteractionSurface(
            t.features, t.edges, t.values - off, t.mean_offset + off))
    return tuple(new_shapes), tuple(new_inter), total


def shift_repr(r, delta: float):
    """Return representation ``r`` with ``delta`` added to every value."""
    if delta == 0.0:
        return r
    if isinstance(r, SplineCurve):
        # partition of unity: a constant shift of all coefficients shifts the curve
        return SplineCurve(r.knots, r.coefficients + delta, r.degree)
    if isinstance(r, StepFunction):
        return StepFunction(r.edges, r.values + delta)
    if isinstance(r, PiecewiseLinear):
        return PiecewiseLinear(r.x, r.y + delta)
    if isinstance(r, CategoryTable):
        return CategoryTable(r.levels, r.values + delta)
    if isinstance(r, Affine):
        return Affine(r.slope, r.shift + delta, r.domain)
    raise TypeError(f"unknown shape representation {type(r).__name__}")


def feature_importance(model: AdditiveModel, data) -> list[tuple[str, float]]:
    """Mean absolute centered contribution per term, largest first.

    Interaction terms are included.  Ties are ordered by term name.
    """
    contrib = model.contributions(data)[:, 1:]
    names = model.term_names[1:]
    imp = np.abs(contrib).mean(axis=0) if len(contrib) else np.zeros(len(names))
    pairs = [(n, float(v)) for n, v in zip(names, imp)]
    return sorted(pairs, key=lambda p: (-p[1], p[0]))


def merge_indicator_shapes(shapes, groups: Mapping[str, Sequence[str]], X: np.ndarray,
                           feature_names) -> tuple[ShapeFunction, ...]:
    """Replace per-indicator shapes of each one-hot group by one CategoryTable.

    A group is merged only if every row of ``X`` has exactly one active
    indicator; then the table value of level ``l`` is ``f_l(1) + sum_k f_k(0)``
    over the other indicators ``k``, which reproduces the per-indicator sum on
    every such row.
    """
    names = list(feature_names)
    by_col = {s.columns[0]: s for s in shapes if len(s.columns) == 1}
    merged: dict[str, str] = {}
    for src, cols in groups.items():
        if not all(c in by_col for c in cols):
            continue
        block = X[:, [names.index(c) for c in cols]]
        if np.all(block.sum(axis=1) == 1.0):
            for c in cols:
                merged[c] = src
    out, emitted = [], set()
    for s in shapes:
        src = merged.get(s.columns[0]) if len(s.columns) == 1 else None
        if src is None:
            out.append(s)
            continue
        if src in emitted:
            continue
        emitted.add(src)
        cols = list(groups[src])
        at0 = np.array([float(by_col[c].repr(np.array([0.0]))[0]) for c in cols])
        at1 = np.array([float(by_col[c].repr(np.array([1.0]))[0]) for c in cols])
        values = at1 - at0 + at0.sum()
        prefix = f"{src}="
        levels = tuple(c[len(prefix):] if c.startswith(prefix) else c for c in cols)
        out.append(ShapeFunction(src, tuple(cols), CategoryTable(levels, values)))
    return tuple(out)
