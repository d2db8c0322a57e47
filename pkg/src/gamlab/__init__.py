"""Generalized additive models and a benchmarking harness for tabular data."""

__version__ = "0.1.0"

from .core import (AdditiveModel, Column, ColumnKind, Dataset, InteractionSurface, LinkKind,  # noqa: E402
                   ModelFamily, ShapeFunction, TaskKind, contributions, feature_importance,
                   predict_raw)
from .pspline import PSplineClassifier, PSplineRegressor, fit_pspline  # noqa: E402
from .tree_gam import TreeGAMClassifier, TreeGAMRegressor, fit_tree_gam  # noqa: E402
from .elm_gam import ElmGAMClassifier, ElmGAMRegressor, fit_elm_gam  # noqa: E402
from .baselines import (CARTClassifier, CARTRegressor, ElasticNetRegressor,  # noqa: E402
                        LogisticElasticNet, fit_cart, fit_elastic_net)
from .metrics import auroc, rank_models, rmse  # noqa: E402

__all__ = [
    "AdditiveModel", "Column", "ColumnKind", "Dataset", "InteractionSurface", "LinkKind",
    "ModelFamily", "ShapeFunction", "TaskKind", "contributions", "feature_importance",
    "predict_raw", "PSplineClassifier", "PSplineRegressor", "fit_pspline",
    "TreeGAMClassifier", "TreeGAMRegressor", "fit_tree_gam", "ElmGAMClassifier",
    "ElmGAMRegressor", "fit_elm_gam", "CARTClassifier", "CARTRegressor",
    "ElasticNetRegressor", "LogisticElasticNet", "fit_cart", "fit_elastic_net", "auroc",
    "rank_models", "rmse", "__version__",
]
