"""Shape-plot data: line, bar and heatmap exports, bootstrap bands, CSV."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .core import AdditiveModel, CategoryTable, Dataset, ShapeFunction, StepFunction, TaskKind

log = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 256
KINDS = ("line", "bar", "heatmap")


@dataclass
class ShapeExport:
    """Plot data of one term.

    ``line``: ``x`` grid and ``y`` values.  ``bar``: ``x`` level labels and
    ``y`` values.  ``heatmap``: ``x`` is a pair of edge vectors and ``y`` the
    cell matrix.  Bands are optional and only used for line and bar exports.
    """

    feature: str
    kind: str
    x: Any
    y: np.ndarray
    band_lower: np.ndarray | None = None
    band_upper: np.ndarray | None = None
    model: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.y = np.asarray(self.y, dtype=float)
        if self.kind == "heatmap":
            ea, eb = (np.asarray(e, dtype=float) for e in self.x)
            self.x = (ea, eb)
            if self.y.shape != (len(ea) - 1, len(eb) - 1):
                raise ValueError("heatmap values do not match its edges")
        else:
            self.x = np.asarray(self.x, dtype=object if self.kind == "bar" else float)
            if len(self.x) != len(self.y):
                raise ValueError(f"{self.feature}: {len(self.x)} grid points, "
                                 f"{len(self.y)} values")
        for b in (self.band_lower, self.band_upper):
            if b is not None and np.shape(b) != self.y.shape:
                raise ValueError("bands must match the values")
        if self.band_lower is not None:
            self.band_lower = np.asarray(self.band_lower, dtype=float)
            self.band_upper = np.asarray(self.band_upper, dtype=float)
            if np.any(self.band_lower > self.y + 1e-12) or np.any(self.y > self.band_upper + 1e-12):
                raise ValueError("bands must enclose the values")

    @property
    def has_band(self) -> bool:
        return self.band_lower is not None


def feature_grid(shape: ShapeFunction, grid_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform grid over the shape's training range.

    Step functions also get every bin's left edge, so each bin is visible.
    """
    lo, hi = shape.repr.domain
    grid = np.linspace(lo, hi, grid_points)
    if isinstance(shape.repr, StepFunction):
        grid = np.union1d(grid, shape.repr.edges[:-1])
    return grid


def _line(shape: ShapeFunction, grid: np.ndarray) -> np.ndarray:
    return shape.evaluate(grid[:, None])


def _bar(shape: ShapeFunction) -> tuple[list[str], np.ndarray]:
    table: CategoryTable = shape.repr
    return list(table.levels), np.asarray(table.values, dtype=float)


def export_shapes(model: AdditiveModel, grid_points: int = DEFAULT_GRID_POINTS,
                  model_name: str | None = None) -> list[ShapeExport]:
    """One export per term: lines for numerics, bars for categoricals, heatmaps for pairs.

    Indicator groups that were fitted as separate numeric shapes (for
    example by tree boosting) are exported as lines over ``[0, 1]``.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    out = []
    for s in model.shapes:
        if s.is_categorical:
            levels, values = _bar(s)
            out.append(ShapeExport(s.feature, "bar", levels, values, model=model_name))
        else:
            grid = feature_grid(s, grid_points)
            out.append(ShapeExport(s.feature, "line", grid, _line(s, grid), model=model_name))
    for t in model.interactions:
        out.append(ShapeExport(t.name, "heatmap", t.edges, t.values, model=model_name))
    return out


# ---------------------------------------------------------------------------
# Bootstrap confidence bands
# ---------------------------------------------------------------------------

def _common_grid(data: Dataset, grid_points: int) -> dict[str, Any]:
    """Per-term grid shared by all replicates: levels for groups, ranges for numerics."""
    X = data.matrix()
    groups = data.categorical_groups()
    grouped = {c for cols in groups.values() for c in cols}
    grids: dict[str, Any] = {}
    for src, cols in groups.items():
        grids[src] = ("bar", list(cols))
    for j, name in enumerate(data.feature_names):
        if name in grouped:
            continue
        grids[name] = ("line", np.linspace(X[:, j].min(), X[:, j].max(), grid_points))
    return grids


def _evaluate_term(model: AdditiveModel, name: str, spec) -> np.ndarray:
    kind, grid = spec
    if kind == "line":
        try:
            s = model.shape(name)
        except KeyError:  # dropped by this replicate (e.g. constant in the sample)
            return np.zeros(len(grid))
        return s.evaluate(grid[:, None])
    # category: contribution of a row with exactly one active level
    cols = grid
    eye = np.eye(len(cols))
    vals = np.zeros(len(cols))
    for s in model.shapes:
        if s.feature == name:
            idx = [cols.index(c) for c in s.columns]
            return s.evaluate(eye[:, idx])
        if len(s.columns) == 1 and s.columns[0] in cols:
            # per-indicator shapes of the group add up, centered on the replicate
            k = cols.index(s.columns[0])
            vals += s.evaluate(eye[:, [k]])
    return vals


def confidence_bands(family, config: Mapping[str, Any] | None, data: Dataset,
                     n_replicates: int = 10, seed: int = 0,
                     grid_points: int = DEFAULT_GRID_POINTS, bootstrap: bool = True,
                     model_name: str | None = None) -> list[ShapeExport]:
    """Mean shape and plus/minus one pointwise std over refits on resamples.

    Replicate ``r`` draws a bootstrap sample (or reuses the full data when
    ``bootstrap`` is false) and fits with a derived seed.  A failing replicate
    is retried with the next derived seed; more than ``3 * n_replicates``
    attempts is an error.  ``data`` must already be preprocessed.  Only main
    effects get bands.
    """
    from .grids import make_estimator
    from .harness import cell_seed

    if n_replicates < 2:
        raise ValueError("n_replicates must be at least 2")
    X = data.matrix()
    names, groups = data.feature_names, data.categorical_groups()
    grids = _common_grid(data, grid_points)
    if not grids:
        raise ValueError("data has no features")
    curves: dict[str, list[np.ndarray]] = {k: [] for k in grids}
    attempts, done = 0, 0
    while done < n_replicates:
        if attempts >= 3 * n_replicates:
            raise RuntimeError(f"only {done} of {n_replicates} replicates succeeded "
                               f"in {attempts} attempts")
        s = cell_seed(seed, "replicate", attempts)
        attempts += 1
        rng = np.random.default_rng(s)
        rows = rng.integers(0, data.n_rows, data.n_rows) if bootstrap else np.arange(data.n_rows)
        y = data.target[rows]
        if data.task is TaskKind.CLASSIFICATION and len(np.unique(y)) < 2:
            log.warning("replicate %d drew a single class; retrying", attempts)
            continue
        try:
            est = make_estimator(family, data.task, config, random_state=s)
            est.fit(X[rows], y, categorical_groups=groups, feature_names=names)
            model = est.model_
            values = {k: _evaluate_term(model, k, spec) for k, spec in grids.items()}
        except Exception as exc:  # noqa: BLE001 - replicate failures are retried
            log.warning("replicate fit failed (%s); retrying with next seed", exc)
            continue
        for k, v in values.items():
            curves[k].append(v)
        done += 1
    out = []
    for k, (kind, grid) in grids.items():
        stack = np.vstack(curves[k])
        mean = stack.mean(axis=0)
        sd = stack.std(axis=0)
        x = grid if kind == "line" else [c.split("=", 1)[-1] for c in grid]
        out.append(ShapeExport(k, kind, x, mean, mean - sd, mean + sd, model=model_name))
    return out


def band_width(export: ShapeExport) -> np.ndarray:
    if not export.has_band:
        raise ValueError(f"{export.feature} has no band")
    return export.band_upper - export.band_lower


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

EXPORT_COLUMNS = ["model", "feature", "kind", "x", "x2", "y", "lower", "upper"]


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def exports_to_csv(exports: Sequence[ShapeExport], path=None) -> str:
    """Long CSV; heatmap rows carry both cell centers in ``x`` and ``x2``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPORT_COLUMNS)
    for e in exports:
        m = e.model or ""
        if e.kind == "heatmap":
            ea, eb = e.x
            ca, cb = (ea[:-1] + ea[1:]) / 2, (eb[:-1] + eb[1:]) / 2
            for i in range(len(ca)):
                for j in range(len(cb)):
                    w.writerow([m, e.feature, e.kind, _num(ca[i]), _num(cb[j]),
                                _num(e.y[i, j]), "", ""])
            continue
        for i in range(len(e.y)):
            x = e.x[i] if e.kind == "bar" else _num(e.x[i])
            lo = _num(e.band_lower[i]) if e.has_band else ""
            hi = _num(e.band_upper[i]) if e.has_band else ""
            w.writerow([m, e.feature, e.kind, x, "", _num(e.y[i]), lo, hi])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def importance_table(model: AdditiveModel, data) -> list[tuple[str, float]]:
    """Mean absolute contribution per term, largest first."""
    from .core import feature_importance
    return feature_importance(model, data)
