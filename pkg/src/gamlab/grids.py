"""Hyperparameter grids, default configurations and estimator factories."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .baselines import (CARTClassifier, CARTRegressor, ElasticNetRegressor,
                        LogisticElasticNet)
from .core import ModelFamily, TaskKind
from .elm_gam import ElmGAMClassifier, ElmGAMRegressor
from .pspline import PSplineClassifier, PSplineRegressor
from .tree_gam import TreeGAMClassifier, TreeGAMRegressor

# solver -> penalties it supports
SOLVER_PENALTIES = {
    "lbfgs": ("l2", None),
    "liblinear": ("l1", "l2"),
    "saga": ("l1", "l2", "elasticnet", None),
    "newton-cg": ("l2", None),
    "sag": ("l2", None),
}


def _logistic_valid(c: Mapping[str, Any]) -> bool:
    penalty, solver = c.get("penalty", "l2"), c.get("solver", "lbfgs")
    if penalty not in SOLVER_PENALTIES.get(solver, ()):
        return False
    return (c.get("l1_ratio") is not None) == (penalty == "elasticnet")


def _logistic_inert(c: Mapping[str, Any]) -> tuple[str, ...]:
    # without a penalty the regularization strength has no effect
    return ("C",) if "penalty" in c and c["penalty"] is None else ()


@dataclass
class GridSpec:
    """Ordered candidate lists per hyperparameter.

    ``valid`` filters incompatible combinations.  ``inert`` names the
    parameters that have no effect for a candidate; candidates that differ
    only in inert parameters are collapsed onto the first one enumerated.
    """

    params: dict[str, list]
    valid: Callable[[Mapping[str, Any]], bool] | None = None
    inert: Callable[[Mapping[str, Any]], tuple[str, ...]] | None = None
    fixed: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.params.items():
            if len(v) == 0:
                raise ValueError(f"grid parameter {k!r} has no candidates")

    @property
    def product_size(self) -> int:
        n = 1
        for v in self.params.values():
            n *= len(v)
        return n

    def candidates(self) -> list[dict[str, Any]]:
        """Valid candidates in row-major order of the listed values."""
        keys = list(self.params)
        out, seen = [], set()
        for combo in itertools.product(*(self.params[k] for k in keys)):
            c = dict(zip(keys, combo))
            if self.valid is not None and not self.valid(c):
                continue
            inert = set(self.inert(c)) if self.inert is not None else set()
            key = tuple((k, repr(c[k])) for k in keys if k not in inert)
            if key in seen:
                continue
            seen.add(key)
            out.append({**self.fixed, **c})
        return out

    def __len__(self):
        return len(self.candidates())


_CLS, _REG = TaskKind.CLASSIFICATION, TaskKind.REGRESSION

_ESTIMATORS = {
    (ModelFamily.PSPLINE, _CLS): PSplineClassifier,
    (ModelFamily.PSPLINE, _REG): PSplineRegressor,
    (ModelFamily.TREE_GAM, _CLS): TreeGAMClassifier,
    (ModelFamily.TREE_GAM, _REG): TreeGAMRegressor,
    (ModelFamily.ELM_GAM, _CLS): ElmGAMClassifier,
    (ModelFamily.ELM_GAM, _REG): ElmGAMRegressor,
    (ModelFamily.LINEAR, _CLS): LogisticElasticNet,
    (ModelFamily.LINEAR, _REG): ElasticNetRegressor,
    (ModelFamily.TREE, _CLS): CARTClassifier,
    (ModelFamily.TREE, _REG): CARTRegressor,
}

_DEFAULTS = {
    ModelFamily.PSPLINE: {"n_splines": 20, "lam": 0.6},
    ModelFamily.TREE_GAM: {"max_bins": 256, "interactions": 10, "outer_bags": 8,
                           "inner_bags": 0},
    ModelFamily.ELM_GAM: {"boost_rate": 0.1, "elm_scale": 1.0, "interactions": 0},
    ModelFamily.TREE: {"max_depth": None, "max_leaf_nodes": None, "class_weight": None,
                       "splitter": "best"},
}
_LINEAR_DEFAULTS = {
    _CLS: {"C": 1.0, "penalty": "l2", "class_weight": None, "solver": "lbfgs",
           "l1_ratio": None, "max_iter": 100},
    _REG: {"alpha": 1.0, "l1_ratio": 0.0},
}


def estimator_class(family, task):
    return _ESTIMATORS[(ModelFamily(family), TaskKind(task))]


def default_config(family, task) -> dict[str, Any]:
    family, task = ModelFamily(family), TaskKind(task)
    if family is ModelFamily.LINEAR:
        return dict(_LINEAR_DEFAULTS[task])
    cfg = dict(_DEFAULTS[family])
    if family is ModelFamily.TREE and task is _REG:
        cfg.pop("class_weight")
    return cfg


def make_estimator(family, task, config: Mapping[str, Any] | None = None, random_state=None):
    """Instantiate the estimator of a family for a task.

    ``random_state`` is forwarded when the estimator accepts one.
    """
    cls = estimator_class(family, task)
    params = dict(config or {})
    if random_state is not None and "random_state" in cls().get_params():
        params["random_state"] = random_state
    return cls(**params)


def default_grid(family, task) -> GridSpec:
    """Tuning grid of a family; value lists are in enumeration order."""
    family, task = ModelFamily(family), TaskKind(task)
    if family is ModelFamily.PSPLINE:
        return GridSpec({"n_splines": [5, 10, 15, 20, 25], "lam": [0.2, 0.4, 0.6, 0.9]})
    if family is ModelFamily.TREE_GAM:
        return GridSpec({"max_bins": [256, 512], "interactions": [0, 10, 20],
                         "outer_bags": [8, 16], "inner_bags": [0, 4]})
    if family is ModelFamily.ELM_GAM:
        return GridSpec({"boost_rate": [0.025, 0.1], "elm_scale": [1.0, 2.0, 5.0],
                         "interactions": [0, 10, 20]})
    if family is ModelFamily.LINEAR:
        if task is _CLS:
            return GridSpec(
                {"C": [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
                 "penalty": ["l1", "l2", "elasticnet", None],
                 "class_weight": ["balanced", None],
                 "solver": ["lbfgs", "liblinear", "saga"],
                 "l1_ratio": [0.25, 0.5, 0.75, None],
                 "max_iter": [100, 300]},
                valid=_logistic_valid, inert=_logistic_inert)
        return GridSpec({"alpha": [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
                         "l1_ratio": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]})
    params = {"max_depth": [5, 10, 20, 40, None], "max_leaf_nodes": [None, 5, 10, 20, 40],
              "class_weight": ["balanced", None], "splitter": ["best", "random"]}
    if task is _REG:
        params.pop("class_weight")
    return GridSpec(params)


def grid_from_mapping(family, task, params: Mapping[str, list]) -> GridSpec:
    """A user grid; keeps the family's compatibility rules."""
    base = default_grid(family, task)
    return GridSpec({k: list(v) for k, v in params.items()}, valid=base.valid,
                    inert=base.inert)
