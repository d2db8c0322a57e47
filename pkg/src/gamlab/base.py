"""Estimator plumbing shared by the additive model families."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .core import LinkKind


class AdditiveEstimator(BaseEstimator):
    """Base for estimators whose fitted state is an :class:`AdditiveModel`.

    Subclasses implement ``_fit(X, y, names, groups, link)`` and return the
    model; fitting stores it as ``model_``.
    """

    _link: LinkKind

    def fit(self, X, y=None, categorical_groups=None, feature_names=None):
        from ._validation import check_binary, check_groups, check_Xy

        A, y, names, groups = check_Xy(X, y, feature_names)
        if y is None:
            raise ValueError("fit() needs a target")
        if categorical_groups is not None:
            groups = categorical_groups
        groups = check_groups(groups, names)
        if self._link is LinkKind.LOGISTIC:
            y = check_binary(y)
            self.classes_ = np.array([0, 1])
        self._validate_params()
        self.model_ = self._fit(A, y, names, groups)
        self.feature_names_in_ = np.array(names, dtype=object)
        self.n_features_in_ = len(names)
        return self

    def _validate_params(self):
        pass

    def _fit(self, X, y, names, groups):
        raise NotImplementedError

    def _checked_model(self):
        check_is_fitted(self, "model_")
        return self.model_

    def decision_function(self, X):
        return self._checked_model().predict_raw(X)

    def predict_raw(self, X):
        return self._checked_model().predict_raw(X)

    def contributions(self, X):
        return self._checked_model().contributions(X)


class AdditiveRegressorMixin(RegressorMixin):
    _link = LinkKind.IDENTITY

    def predict(self, X):
        return self._checked_model().predict(X)


class AdditiveClassifierMixin(ClassifierMixin):
    _link = LinkKind.LOGISTIC

    def predict_proba(self, X):
        p = self._checked_model().predict(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
