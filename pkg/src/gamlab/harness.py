"""Cross-validated benchmarking with nested grid search.

Per dataset the rows are cut into ``n_folds`` seeded folds (stratified for
classification).  Per (dataset, model, fold) cell the preprocessing plan is
fit on the training fold only.  In ``tuned`` mode a grid search picks the
configuration on one inner train/validation split of the training fold and the
winner is refit on the whole training fold.  The test fold is touched only for
scoring.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .core import Dataset, ModelFamily, TaskKind
from .grids import GridSpec, default_config, default_grid, grid_from_mapping, make_estimator
from .metrics import higher_is_better, primary_metric, rank_models, secondary_metrics
from .preprocess import DatasetDescriptor, apply_plan, fit_plan, load_dataset
from . import synthetic

log = logging.getLogger(__name__)

FOLD_COLUMNS = ["task", "dataset", "model", "family", "fold", "metric", "value", "status",
                "n_train", "n_test", "validation_score", "config", "secondary", "error"]
MODES = ("default", "tuned")


class HarnessError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Seeds, folds and splits
# ---------------------------------------------------------------------------

def cell_seed(run_seed: int, *parts) -> int:
    """Deterministic 32-bit seed from the run seed and a cell key."""
    text = "\x1f".join([str(int(run_seed))] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "little")


def split_folds(y, n_folds: int, seed: int, stratified: bool) -> list[np.ndarray]:
    """Disjoint, covering test-fold index sets.

    Stratified folds deal each class's shuffled rows round-robin, continuing
    where the previous class stopped, so every fold holds each class within
    one row of its share and fold sizes differ by at most one.
    """
    y = np.asarray(y.target if isinstance(y, Dataset) else y, dtype=float)
    n = len(y)
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    if n < n_folds:
        raise ValueError(f"{n} rows cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    if not stratified:
        return [np.sort(f) for f in np.array_split(rng.permutation(n), n_folds)]
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2 or counts.min() < n_folds:
        raise ValueError(f"stratified folds need every class at least {n_folds} times "
                         f"(class counts {dict(zip(classes.tolist(), counts.tolist()))})")
    folds = [[] for _ in range(n_folds)]
    offset = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        for k, i in enumerate(idx):
            folds[(offset + k) % n_folds].append(i)
        offset = (offset + len(idx)) % n_folds
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def inner_split(y, fraction: float, seed: int, stratified: bool) -> tuple[np.ndarray, np.ndarray]:
    """One train/validation split; each class keeps at least one row on each side."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    groups = [np.flatnonzero(y == c) for c in np.unique(y)] if stratified else [np.arange(n)]
    val = []
    for idx in groups:
        if len(idx) < 2:
            raise ValueError("every class needs at least two rows for an inner split")
        k = min(max(int(round(fraction * len(idx))), 1), len(idx) - 1)
        val.append(rng.permutation(idx)[:k])
    val = np.sort(np.concatenate(val))
    train = np.setdiff1d(np.arange(n), val)
    return train, val


# ---------------------------------------------------------------------------
# Leakage instrumentation
# ---------------------------------------------------------------------------

class LeakageAudit:
    """Counts how often fitting code sees rows of the current test fold.

    Fitting stages report the ``row_ids`` of the data they receive through
    :meth:`observe`; the audit intersects them with the registered test ids.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.test_ids: frozenset = frozenset()
        self.test_row_accesses = 0
        self.observations = 0
        self.events: list[tuple[str, int]] = []

    def set_test(self, row_ids) -> None:
        self.test_ids = frozenset(np.asarray(row_ids).tolist())

    def observe(self, stage: str, row_ids) -> None:
        if not self.enabled:
            return
        self.observations += 1
        hits = len(self.test_ids.intersection(np.asarray(row_ids).tolist()))
        if hits:
            self.test_row_accesses += hits
            self.events.append((stage, hits))
            log.error("leakage: stage %s saw %d test rows", stage, hits)


# ---------------------------------------------------------------------------
# Fitting a single configuration
# ---------------------------------------------------------------------------

def _design(data: Dataset):
    return data.matrix(), data.feature_names, data.categorical_groups()


def _score_vector(est, X, task):
    if TaskKind(task) is TaskKind.CLASSIFICATION:
        return est.predict_proba(X)[:, 1]
    return est.predict(X)


def fit_config(family, train_raw: Dataset, config: Mapping[str, Any], seed: int,
               drop: Sequence[str] = (), audit: LeakageAudit | None = None):
    """Preprocess on ``train_raw`` and fit one configuration.

    Returns ``(plan, estimator, fit_seconds)``; only the estimator fit is timed.
    """
    audit = audit or LeakageAudit(enabled=False)
    audit.observe("preprocess", train_raw.row_ids)
    plan = fit_plan(train_raw, drop)
    train = apply_plan(plan, train_raw)
    X, names, groups = _design(train)
    est = make_estimator(family, train.task, config, random_state=seed)
    audit.observe("fit", train.row_ids)
    t0 = time.perf_counter()
    est.fit(X, train.target, categorical_groups=groups, feature_names=names)
    return plan, est, time.perf_counter() - t0


def evaluate(plan, est, raw: Dataset):
    data = apply_plan(plan, raw)
    return data.target, _score_vector(est, data.matrix(), data.task)


@dataclass
class GridResult:
    best_config: dict
    best_index: int
    best_score: float
    scores: list[float | None]
    failures: list[tuple[int, str]]


def grid_search(train_raw: Dataset, family, grid: GridSpec, seed: int,
                inner_val_fraction: float = 0.2, drop: Sequence[str] = (),
                audit: LeakageAudit | None = None, seed_key=()) -> GridResult:
    """Score every candidate on one inner split of ``train_raw``.

    The preprocessing plan is refit on the inner training part.  Ties keep the
    earliest candidate.  Failing candidates are skipped and logged.
    """
    candidates = grid.candidates()
    if not candidates:
        raise HarnessError("grid has no valid candidates")
    task = train_raw.task
    stratified = task is TaskKind.CLASSIFICATION
    tr, va = inner_split(train_raw.target, inner_val_fraction, seed, stratified)
    inner_train, inner_val = train_raw.subset(tr), train_raw.subset(va)
    better = higher_is_better(task)
    scores: list[float | None] = []
    failures = []
    best = None
    for i, cfg in enumerate(candidates):
        try:
            plan, est, _ = fit_config(family, inner_train, cfg, cell_seed(seed, *seed_key, i),
                                      drop, audit)
            y, p = evaluate(plan, est, inner_val)
            s = primary_metric(task, y, p)
            if not math.isfinite(s):
                raise HarnessError(f"non-finite validation score {s}")
        except Exception as exc:  # noqa: BLE001 - a candidate failure must not stop the search
            log.warning("candidate %d %s failed: %s", i, cfg, exc)
            failures.append((i, f"{type(exc).__name__}: {exc}"))
            scores.append(None)
            continue
        scores.append(s)
        if best is None or (s > scores[best] if better else s < scores[best]):
            best = i
    if best is None:
        raise HarnessError(f"all {len(candidates)} candidates failed; first error: "
                           f"{failures[0][1]}")
    return GridResult(dict(candidates[best]), best, float(scores[best]), scores, failures)


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class ModelSpec:
    """A named model: family plus fixed config (default mode) or grid (tuned mode)."""

    name: str
    family: str
    config: dict = field(default_factory=dict)
    grid: dict | None = None

    def __post_init__(self):
        self.family = ModelFamily(self.family).value

    def resolved_config(self, task) -> dict:
        return {**default_config(self.family, task), **(_for_task(self.config, task) or {})}

    def resolved_grid(self, task) -> GridSpec:
        grid = None if self.grid is None else _for_task(self.grid, task)
        if grid is None:
            g = default_grid(self.family, task)
        else:
            g = grid_from_mapping(self.family, task, grid)
        # fixed settings apply to every candidate unless the grid varies them
        fixed = _for_task(self.config, task) or {}
        g.fixed = {k: v for k, v in fixed.items() if k not in g.params}
        return g


def _for_task(settings: dict, task):
    """Per-task settings when keyed by task names, else the settings themselves.

    A task missing from a task-keyed mapping gets ``None`` for grids (use the
    default grid) and ``{}`` for configs.
    """
    names = {t.value for t in TaskKind}
    if settings and set(settings) <= names and all(
            v is None or isinstance(v, Mapping) for v in settings.values()):
        return settings.get(TaskKind(task).value)
    return settings


@dataclass
class RunConfig:
    datasets: list
    models: list[ModelSpec]
    n_folds: int = 5
    inner_val_fraction: float = 0.2
    seed: int = 0
    mode: str = "default"
    output_dir: str = "results"
    run_name: str = "run"
    n_jobs: int = 1
    debug: bool = False

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("n_folds must be at least 2")
        if not 0.0 < self.inner_val_fraction < 0.5:
            raise ValueError("inner_val_fraction must lie in (0, 0.5)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.models = [m if isinstance(m, ModelSpec) else ModelSpec(**m) for m in self.models]
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate model names: {names}")
        if not self.datasets or not self.models:
            raise ValueError("a run needs at least one dataset and one model")

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_name

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "datasets"}
        d["models"] = [asdict(m) for m in self.models]
        d["datasets"] = [asdict(x) if isinstance(x, DatasetDescriptor)
                         else {"name": x.name, "in_memory": True} if isinstance(x, Dataset)
                         else x for x in self.datasets]
        return d


def load_run_config(path) -> RunConfig:
    """Read a YAML run configuration; relative paths resolve against its folder."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise ValueError(f"run config {path} must be a mapping")
    base = path.parent
    datasets = []
    for entry in d.get("datasets", []):
        if isinstance(entry, str):
            p = Path(entry)
            datasets.append(str(p if p.is_absolute() else base / p))
        elif isinstance(entry, Mapping) and "synthetic" in entry:
            datasets.append(dict(entry))
        elif isinstance(entry, Mapping):
            e = dict(entry)
            if "path" in e and not Path(e["path"]).is_absolute():
                e["path"] = str(base / e["path"])
            e.setdefault("name", Path(e["path"]).stem)
            datasets.append(DatasetDescriptor(**e))
        else:
            raise ValueError(f"bad dataset entry {entry!r}")
    d["datasets"] = datasets
    out = Path(d.get("output_dir", "results"))
    d["output_dir"] = str(out if out.is_absolute() else base / out)
    d.setdefault("run_name", path.stem)
    return RunConfig(**d)


def resolve_dataset(entry) -> tuple[Dataset, list[str]]:
    """A raw dataset plus its explicit drop list."""
    if isinstance(entry, Mapping) and "synthetic" in entry:
        params = {k: v for k, v in entry.items() if k not in ("synthetic", "name", "drop")}
        data = synthetic.make(entry["synthetic"], **params)
        if "name" in entry:
            data.name = entry["name"]
        return data, list(entry.get("drop", []))
    if isinstance(entry, Dataset):
        return entry, []
    if not isinstance(entry, DatasetDescriptor):
        from .preprocess import load_descriptor
        entry = load_descriptor(entry)
    return load_dataset(entry), list(entry.drop)


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _run_cell(job) -> dict:
    (data, drop, spec, fold, test_idx, cfg) = job
    task = data.task
    audit = LeakageAudit(enabled=cfg.debug)
    seed = cell_seed(cfg.seed, data.name, spec.name, fold)
    train_idx = np.setdiff1d(np.arange(data.n_rows), test_idx)
    train_raw, test_raw = data.subset(train_idx), data.subset(test_idx)
    audit.set_test(test_raw.row_ids)
    row = {"task": task.value, "dataset": data.name, "model": spec.name,
           "family": spec.family, "fold": fold,
           "metric": "auroc" if task is TaskKind.CLASSIFICATION else "rmse",
           "n_train": len(train_idx), "n_test": len(test_idx)}
    timing = {"dataset": data.name, "model": spec.name, "fold": fold}
    try:
        t0 = time.perf_counter()
        if cfg.mode == "tuned":
            res = grid_search(train_raw, spec.family, spec.resolved_grid(task), seed,
                              cfg.inner_val_fraction, drop, audit,
                              seed_key=(data.name, spec.name, fold))
            config, val_score = res.best_config, res.best_score
        else:
            config, val_score = spec.resolved_config(task), None
        tune_seconds = time.perf_counter() - t0 if cfg.mode == "tuned" else 0.0
        plan, est, fit_seconds = fit_config(spec.family, train_raw, config, seed, drop, audit)
        y, p = evaluate(plan, est, test_raw)
        value = primary_metric(task, y, p)
        row.update(value=float(value), status="ok", validation_score=val_score,
                   config=json.dumps(config, sort_keys=True),
                   secondary=json.dumps(secondary_metrics(task, y, p), sort_keys=True),
                   error="")
        timing.update(fit_seconds=fit_seconds, tune_seconds=tune_seconds)
    except Exception as exc:  # noqa: BLE001 - fold failures are recorded, not fatal
        log.warning("%s / %s fold %d failed: %s", data.name, spec.name, fold, exc)
        row.update(value=None, status="failed", validation_score=None, config="",
                   secondary="", error=f"{type(exc).__name__}: {exc}".replace("\n", " "))
        timing.update(fit_seconds=None, tune_seconds=None)
    return {"row": row, "timing": timing, "seed": seed,
            "leakage": audit.test_row_accesses, "observations": audit.observations}


class _FoldWriter:
    """Single writer appending fold rows to ``folds.csv`` as they arrive."""

    def __init__(self, path: Path):
        self.path = path
        self.fh = open(path, "w", encoding="utf-8", newline="")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(FOLD_COLUMNS)
        self.fh.flush()

    def write(self, row: dict) -> None:
        self.w.writerow([_fmt(row.get(c)) for c in FOLD_COLUMNS])
        self.fh.flush()

    def close(self):
        self.fh.close()


@dataclass
class ResultStore:
    folds: pd.DataFrame
    summary: pd.DataFrame
    ranks: dict
    manifest: dict
    run_dir: Path


def summarize(folds: pd.DataFrame, n_folds: int | None = None) -> pd.DataFrame:
    """Mean and population std over the successful folds of each cell.

    ``incomplete`` flags cells where some folds failed.
    """
    rows = []
    for (task, ds, model), g in folds.groupby(["task", "dataset", "model"], sort=False):
        ok = g[g["status"] == "ok"]["value"].astype(float)
        total = n_folds if n_folds is not None else len(g)
        rows.append({"task": task, "dataset": ds, "model": model,
                     "mean": float(ok.mean()) if len(ok) else math.nan,
                     "std": float(np.std(ok.to_numpy())) if len(ok) else math.nan,
                     "n_folds": int(len(ok)), "incomplete": bool(len(ok) < total)})
    return pd.DataFrame(rows, columns=["task", "dataset", "model", "mean", "std", "n_folds",
                                       "incomplete"])


def write_rank_tables(summary: pd.DataFrame, run_dir: Path, models=None) -> dict:
    """Rank per task group; datasets lacking any model's result are left out."""
    out = {}
    for task, fname in ((TaskKind.CLASSIFICATION, "rank_cls.csv"),
                        (TaskKind.REGRESSION, "rank_reg.csv")):
        s = summary[(summary["task"] == task.value) & summary["mean"].notna()]
        if s.empty:
            continue
        model_list = list(models) if models is not None else list(dict.fromkeys(s["model"]))
        complete = [ds for ds, g in s.groupby("dataset", sort=False)
                    if set(model_list) <= set(g["model"])]
        skipped = sorted(set(s["dataset"]) - set(complete))
        if skipped:
            log.warning("%s ranking skips datasets with missing cells: %s", task.value, skipped)
        s = s[s["dataset"].isin(complete) & s["model"].isin(model_list)]
        if s.empty:
            continue
        table = rank_models(s, task=task, models=model_list)
        frame = table.to_frame()
        flags = summary.set_index(["dataset", "model"])["incomplete"]
        frame["incomplete"] = [bool(flags.get((d, m), False)) if d != "AVERAGE" else False
                               for d, m in zip(frame["dataset"], frame["model"])]
        frame.to_csv(run_dir / fname, index=False, float_format="%.6g", lineterminator="\n")
        out[task.value] = table
    return out


def _versions() -> dict:
    import scipy
    import sklearn
    return {"gamlab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__,
            "scikit-learn": sklearn.__version__}


def run_experiment(cfg: RunConfig) -> ResultStore:
    """Run every (dataset, model, fold) cell and write the result files.

    Files in ``<output_dir>/<run_name>/``: ``folds.csv`` (deterministic under
    the run seed), ``timings.csv``, ``summary.csv``, ``rank_cls.csv`` /
    ``rank_reg.csv`` and ``manifest.json``.
    """
    run_dir = cfg.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    fold_seeds = {}
    for entry in cfg.datasets:
        data, drop = resolve_dataset(entry)
        if data.name in fold_seeds:
            raise HarnessError(f"duplicate dataset name {data.name!r}; set a distinct name")
        fseed = cell_seed(cfg.seed, data.name, "folds")
        fold_seeds[data.name] = fseed
        folds = split_folds(data.target, cfg.n_folds, fseed,
                            stratified=data.task is TaskKind.CLASSIFICATION)
        for spec in cfg.models:
            for k, test_idx in enumerate(folds):
                jobs.append((data, drop, spec, k, test_idx, cfg))
    writer = _FoldWriter(run_dir / "folds.csv")
    results = []
    t_start = time.perf_counter()
    try:
        if cfg.n_jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
                for res in pool.map(_run_cell, jobs):
                    writer.write(res["row"])
                    results.append(res)
        else:
            for job in jobs:
                res = _run_cell(job)
                writer.write(res["row"])
                results.append(res)
    finally:
        writer.close()
    wall = time.perf_counter() - t_start
    folds_df = pd.read_csv(run_dir / "folds.csv", keep_default_na=False,
                           dtype={"config": str, "secondary": str, "error": str})
    folds_df["value"] = pd.to_numeric(folds_df["value"], errors="coerce")
    pd.DataFrame([r["timing"] for r in results]).to_csv(
        run_dir / "timings.csv", index=False, lineterminator="\n")
    summary = summarize(folds_df, cfg.n_folds)
    summary.to_csv(run_dir / "summary.csv", index=False, lineterminator="\n")
    ranks = write_rank_tables(summary, run_dir, [m.name for m in cfg.models])
    manifest = {
        "run_name": cfg.run_name, "seed": cfg.seed, "mode": cfg.mode,
        "n_folds": cfg.n_folds, "inner_val_fraction": cfg.inner_val_fraction,
        "versions": _versions(),
        "fold_seeds": fold_seeds,
        "cell_seeds": {f"{r['row']['dataset']}/{r['row']['model']}/{r['row']['fold']}": r["seed"]
                       for r in results},
        "failed_cells": [f"{r['row']['dataset']}/{r['row']['model']}/{r['row']['fold']}"
                         for r in results if r["row"]["status"] != "ok"],
        "incomplete_cells": [f"{d}/{m}" for d, m, inc in
                             summary[["dataset", "model", "incomplete"]].itertuples(index=False)
                             if inc],
        "leakage_audit": cfg.debug,
        "leakage_observations": int(sum(r["observations"] for r in results)),
        "leakage_test_row_accesses": int(sum(r["leakage"] for r in results)),
        "timings_file": "timings.csv",
        "wall_clock_seconds": wall,
        "config": cfg.to_dict(),
    }
    with open(run_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return ResultStore(folds_df, summary, ranks, manifest, run_dir)


# ---------------------------------------------------------------------------
# External results
# ---------------------------------------------------------------------------

FOLD_SCHEMA = ("dataset", "model", "fold", "value")
SUMMARY_SCHEMA = ("dataset", "model", "mean", "std")


def import_external_results(path, known_tasks: Mapping[str, str] | None = None) -> pd.DataFrame:
    """Read externally produced results as summary cells.

    Two layouts are accepted: fold level (``dataset, model, fold, value``) or
    summary level (``dataset, model, mean, std``), each with an optional
    ``task`` column.  Without it the task is looked up in ``known_tasks``.
    Errors name the offending CSV line (the header is line 1).  An empty file
    yields an empty frame.
    """
    text = Path(path).read_text(encoding="utf-8")
    empty = pd.DataFrame(columns=["task", "dataset", "model", "mean", "std", "n_folds",
                                  "incomplete"])
    if not text.strip():
        return empty
    df = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    cols = set(df.columns)
    if set(FOLD_SCHEMA) <= cols:
        schema, key = FOLD_SCHEMA, ["dataset", "model", "fold"]
    elif set(SUMMARY_SCHEMA) <= cols:
        schema, key = SUMMARY_SCHEMA, ["dataset", "model"]
    else:
        raise ValueError(f"{path}: columns {sorted(cols)} match neither "
                         f"{list(FOLD_SCHEMA)} nor {list(SUMMARY_SCHEMA)}")
    if df.empty:
        return empty
    known = dict(known_tasks or {})
    tasks = []
    numeric = [c for c in schema if c not in ("dataset", "model")]
    for i, rec in enumerate(df.to_dict("records")):
        line = i + 2
        if not rec["dataset"].strip() or not rec["model"].strip():
            raise ValueError(f"{path}: line {line}: empty dataset or model")
        for c in numeric:
            try:
                v = float(rec[c])
            except ValueError:
                raise ValueError(f"{path}: line {line}: column {c!r} is not a number: "
                                 f"{rec[c]!r}") from None
            if not math.isfinite(v) or (c == "fold" and (v < 0 or v != int(v))):
                raise ValueError(f"{path}: line {line}: bad {c} value {rec[c]!r}")
        task = rec.get("task", "").strip() or known.get(rec["dataset"])
        if task is None:
            raise ValueError(f"{path}: line {line}: task unknown for dataset {rec['dataset']!r}")
        try:
            tasks.append(TaskKind(task).value)
        except ValueError:
            raise ValueError(f"{path}: line {line}: unknown task {task!r}") from None
    df["task"] = tasks
    dup = df.duplicated(key, keep="first")
    if dup.any():
        first = int(np.flatnonzero(dup.to_numpy())[0])
        raise ValueError(f"{path}: line {first + 2}: duplicate {dict(df.loc[first, key])}")
    if schema is FOLD_SCHEMA:
        folds = df.assign(value=df["value"].astype(float), status="ok")
        return summarize(folds)
    out = df[["task", "dataset", "model"]].copy()
    out["mean"] = df["mean"].astype(float)
    out["std"] = df["std"].astype(float)
    out["n_folds"] = np.nan
    out["incomplete"] = False
    return out


def merge_results(native: pd.DataFrame, external: pd.DataFrame) -> pd.DataFrame:
    """Stack native and imported summaries; a cell present in both is an error."""
    if external.empty:
        return native.copy()
    both = pd.concat([native, external], ignore_index=True)
    dup = both.duplicated(["dataset", "model"], keep=False)
    if dup.any():
        raise ValueError(f"cells present in both sources: "
                         f"{both.loc[dup, ['dataset', 'model']].drop_duplicates().values.tolist()}")
    return both


def rank_results(results_dir, external: Sequence = (), out_dir=None) -> dict:
    """Re-rank a finished run, optionally merged with imported results."""
    results_dir = Path(results_dir)
    summary = summarize(pd.read_csv(results_dir / "folds.csv", keep_default_na=False,
                                    dtype={"config": str, "secondary": str, "error": str})
                        .assign(value=lambda d: pd.to_numeric(d["value"], errors="coerce")))
    known = dict(zip(summary["dataset"], summary["task"]))
    for path in external:
        summary = merge_results(summary, import_external_results(path, known))
    out_dir = Path(out_dir) if out_dir is not None else results_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    return write_rank_tables(summary, out_dir)
