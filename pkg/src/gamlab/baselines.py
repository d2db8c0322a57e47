"""Baseline models: elastic-net linear/logistic regression and CART trees.

The linear models are returned as :class:`AdditiveModel` objects with affine
shapes so they plug into every GAM tool.  Trees have their own predictor.
"""

from __future__ import annotations

import heapq
import logging
import numbers
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import balanced_weights, check_binary, check_scalar, check_Xy
from .base import AdditiveClassifierMixin, AdditiveEstimator, AdditiveRegressorMixin
from .core import (
    AdditiveModel, Affine, Dataset, LinkKind, ModelFamily, ShapeFunction, TaskKind,
    _as_matrix, center_shapes, merge_indicator_shapes,
)

log = logging.getLogger(__name__)

PENALTIES = ("l1", "l2", "elasticnet", None)
SOLVERS = ("lbfgs", "liblinear", "saga", "newton-cg", "sag")


# ---------------------------------------------------------------------------
# Elastic net
# ---------------------------------------------------------------------------

def _soft(x, t):
    return np.sign(x) * max(abs(x) - t, 0.0)


def _cd_weighted_ls(X, z, w, alpha, l1_ratio, beta, max_iter, tol):
    """Coordinate descent on ``1/2 sum w (z - X b)^2 + alpha * penalty(b)``.

    ``w`` sums to 1 and ``X``, ``z`` are centered with the weighted means, so
    the intercept is handled outside.  Returns ``(beta, converged, sweeps)``.
    """
    beta = beta.copy()
    col_sq = w @ (X * X)
    denom = col_sq + alpha * (1.0 - l1_ratio)
    thresh = alpha * l1_ratio
    r = z - X @ beta
    wX = X * w[:, None]
    for sweep in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(X.shape[1]):
            old = beta[j]
            if denom[j] <= 0.0:
                new = 0.0
            else:
                rho = wX[:, j] @ r + col_sq[j] * old
                new = _soft(rho, thresh) / denom[j]
            if new != old:
                r -= X[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            return beta, True, sweep
    return beta, False, max_iter


def _penalty(beta, alpha, l1_ratio):
    return alpha * (l1_ratio * np.abs(beta).sum() + 0.5 * (1 - l1_ratio) * beta @ beta)


def elastic_net_path_point(X, y, alpha, l1_ratio, sample_weight=None, max_iter=1000,
                           tol=1e-7):
    """Least-squares elastic net; returns ``(intercept, beta, converged)``."""
    n = len(y)
    w = np.full(n, 1.0 / n) if sample_weight is None else sample_weight / sample_weight.sum()
    xm, ym = w @ X, w @ y
    beta, conv, _ = _cd_weighted_ls(X - xm, y - ym, w, alpha, l1_ratio,
                                    np.zeros(X.shape[1]), max_iter, tol)
    return float(ym - xm @ beta), beta, conv


def logistic_elastic_net(X, y, alpha, l1_ratio, sample_weight=None, max_iter=100,
                         tol=1e-7, inner_max_iter=1000):
    """Proximal Newton for the penalized mean log-loss.

    Each outer step makes the IRLS quadratic approximation and solves it by
    coordinate descent; the step is halved until the objective decreases.
    """
    n, p = X.shape
    w = np.full(n, 1.0 / n) if sample_weight is None else sample_weight / sample_weight.sum()
    m = min(max(w @ y, 1e-6), 1 - 1e-6)
    b0, beta = float(np.log(m / (1 - m))), np.zeros(p)

    def objective(b0, beta):
        eta = b0 + X @ beta
        return float(w @ (np.logaddexp(0.0, eta) - y * eta)) + _penalty(beta, alpha, l1_ratio)

    obj = objective(b0, beta)
    converged = False
    for _ in range(max_iter):
        eta = b0 + X @ beta
        mu = expit(eta)
        h = np.maximum(mu * (1 - mu), 1e-6)
        z = eta + (y - mu) / h
        wh = w * h
        wh_sum = wh.sum()
        wn = wh / wh_sum
        xm, zm = wn @ X, wn @ z
        # the quadratic model is scaled by wh_sum; rescale alpha to match
        nb, _, _ = _cd_weighted_ls(X - xm, z - zm, wn, alpha / wh_sum, l1_ratio, beta,
                                   inner_max_iter, tol * 0.1)
        nb0 = float(zm - xm @ nb)
        t = 1.0
        while True:
            cb0, cbeta = b0 + t * (nb0 - b0), beta + t * (nb - beta)
            cobj = objective(cb0, cbeta)
            if cobj <= obj + 1e-12 * max(1.0, abs(obj)):
                break
            t *= 0.5
            if t < 1e-8:
                cbeta = None
                break
        if cbeta is None:
            # no further descent possible
            converged = True
            break
        change = max(abs(cb0 - b0), float(np.max(np.abs(cbeta - beta), initial=0.0)))
        b0, beta, obj = cb0, cbeta, cobj
        if change < tol:
            converged = True
            break
    return b0, beta, converged


def _linear_model(X, names, groups, intercept, beta, link):
    shapes = [ShapeFunction(name, (name,),
                            Affine(float(beta[j]), 0.0,
                                   (float(X[:, j].min()), float(X[:, j].max()))))
              for j, name in enumerate(names)]
    shapes = merge_indicator_shapes(shapes, groups, X, names)
    shapes, _, offset = center_shapes(shapes, (), X, names)
    return AdditiveModel(intercept=intercept + offset, shapes=shapes, interactions=(),
                         link=link, family=ModelFamily.LINEAR, feature_names=tuple(names))


class ElasticNetRegressor(AdditiveRegressorMixin, AdditiveEstimator):
    """Linear regression with an elastic-net penalty.

    Minimises ``1/(2N) ||y - b - X beta||^2 + alpha * (l1_ratio ||beta||_1
    + (1 - l1_ratio)/2 ||beta||^2)`` by cyclic coordinate descent.
    """

    def __init__(self, alpha=1.0, l1_ratio=0.0, max_iter=1000, tol=1e-7):
        self.alpha = alpha
        self.l1_ratio = l1_ratio
        self.max_iter = max_iter
        self.tol = tol

    def _validate_params(self):
        check_scalar(self.alpha, "alpha", low=0.0)
        check_scalar(self.l1_ratio, "l1_ratio", low=0.0, high=1.0)
        check_scalar(self.max_iter, "max_iter", kind=numbers.Integral, low=1)
        check_scalar(self.tol, "tol", low=0.0, low_open=True)

    def _fit(self, X, y, names, groups):
        b0, beta, conv = elastic_net_path_point(X, y, float(self.alpha), float(self.l1_ratio),
                                                None, self.max_iter, self.tol)
        if not conv:
            log.warning("coordinate descent stopped at max_iter=%d", self.max_iter)
        self.converged_, self.coef_, self.intercept_ = conv, beta, b0
        return _linear_model(X, names, groups, b0, beta, LinkKind.IDENTITY)


def penalty_to_alpha(C, penalty, l1_ratio, n_samples):
    """Map the ``(C, penalty, l1_ratio)`` convention to ``(alpha, l1_ratio)``.

    ``C * sum(loss) + penalty(beta)`` equals ``N C`` times the mean-loss
    objective with ``alpha = 1 / (C N)``.
    """
    if penalty is None:
        return 0.0, 0.0
    alpha = 1.0 / (C * n_samples)
    if penalty == "l1":
        return alpha, 1.0
    if penalty == "l2":
        return alpha, 0.0
    if penalty == "elasticnet":
        if l1_ratio is None:
            raise ValueError("penalty='elasticnet' needs l1_ratio")
        return alpha, float(l1_ratio)
    raise ValueError(f"unknown penalty {penalty!r}")


class LogisticElasticNet(AdditiveClassifierMixin, AdditiveEstimator):
    """Penalized logistic regression parametrised like the usual ``C`` interface.

    Parameters
    ----------
    C : float, default=1.0
        Inverse penalty strength; ``alpha = 1 / (C N)``.
    penalty : {"l2", "l1", "elasticnet", None}, default="l2"
    l1_ratio : float or None
        Only used with ``penalty="elasticnet"``.
    solver : str, default="lbfgs"
        Accepted for grid compatibility; every solver name runs the same
        proximal Newton method.
    class_weight : {None, "balanced"}
    max_iter : int, default=100
        Outer Newton iterations.
    """

    def __init__(self, C=1.0, penalty="l2", l1_ratio=None, solver="lbfgs", class_weight=None,
                 max_iter=100, tol=1e-7):
        self.C = C
        self.penalty = penalty
        self.l1_ratio = l1_ratio
        self.solver = solver
        self.class_weight = class_weight
        self.max_iter = max_iter
        self.tol = tol

    def _validate_params(self):
        check_scalar(self.C, "C", low=0.0, low_open=True)
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.class_weight not in (None, "balanced"):
            raise ValueError("class_weight must be None or 'balanced'")
        if self.l1_ratio is not None:
            check_scalar(self.l1_ratio, "l1_ratio", low=0.0, high=1.0)
        check_scalar(self.max_iter, "max_iter", kind=numbers.Integral, low=1)

    def _fit(self, X, y, names, groups):
        alpha, l1 = penalty_to_alpha(float(self.C), self.penalty, self.l1_ratio, len(y))
        sw = balanced_weights(y) if self.class_weight == "balanced" else None
        b0, beta, conv = logistic_elastic_net(X, y, alpha, l1, sw, self.max_iter, self.tol)
        if not conv:
            log.warning("logistic elastic net stopped at max_iter=%d", self.max_iter)
        self.converged_, self.coef_, self.intercept_ = conv, beta, b0
        return _linear_model(X, names, groups, b0, beta, LinkKind.LOGISTIC)


def fit_elastic_net(data: Dataset, **params) -> AdditiveModel:
    cls = LogisticElasticNet if data.task is TaskKind.CLASSIFICATION else ElasticNetRegressor
    return cls(**params).fit(data).model_


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeModel:
    """Binary decision tree; node ``i`` splits on ``x[feature[i]] <= threshold[i]``.

    Leaves have ``feature == -1``.  ``value`` is the leaf mean (regression) or
    the weighted share of class 1 (classification).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    task: TaskKind
    feature_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        A = _as_matrix(X, self.feature_names)
        node = np.zeros(len(A), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            f = self.feature[node[idx]]
            go_left = A[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        """Leaf mean, or probability of class 1."""
        return self.value[self.apply(X)]


def _impurity(stats, classification):
    """Weighted impurity (total weight times Gini or variance) from sufficient stats."""
    w, s1, s2 = stats
    if w <= 0:
        return 0.0
    if classification:
        p = s1 / w
        return w * 2.0 * p * (1.0 - p)
    return s2 - s1 * s1 / w


def _best_split(X, y, w, rows, classification, splitter, rng, min_leaf):
    """Best (gain, feature, threshold) over all features for the node's ``rows``."""
    yr, wr = y[rows], w[rows]
    tw, ts1, ts2 = wr.sum(), wr @ yr, wr @ (yr * yr)
    parent = _impurity((tw, ts1, ts2), classification)
    best = (0.0, -1, 0.0)
    n = len(rows)
    for j in range(X.shape[1]):
        x = X[rows, j]
        if splitter == "random":
            lo, hi = x.min(), x.max()
            if lo == hi:
                continue
            t = rng.uniform(lo, hi)
            left = x <= t
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            wl = wr[left].sum()
            s1 = wr[left] @ yr[left]
            s2 = wr[left] @ (yr[left] ** 2)
            child = (_impurity((wl, s1, s2), classification)
                     + _impurity((tw - wl, ts1 - s1, ts2 - s2), classification))
            gain = parent - child
            if gain > best[0] + 1e-12 * max(1.0, abs(parent)):
                best = (gain, j, float(t))
            continue
        order = np.argsort(x, kind="mergesort")
        xs, ys, ws = x[order], yr[order], wr[order]
        cw = np.cumsum(ws)[:-1]
        c1 = np.cumsum(ws * ys)[:-1]
        c2 = np.cumsum(ws * ys * ys)[:-1]
        valid = xs[1:] > xs[:-1]
        cnt = np.arange(1, n)
        valid &= (cnt >= min_leaf) & (n - cnt >= min_leaf)
        if not valid.any():
            continue
        rw, r1, r2 = tw - cw, ts1 - c1, ts2 - c2
        if classification:
            with np.errstate(divide="ignore", invalid="ignore"):
                pl = np.where(cw > 0, c1 / cw, 0.0)
                pr = np.where(rw > 0, r1 / rw, 0.0)
            child = cw * 2 * pl * (1 - pl) + rw * 2 * pr * (1 - pr)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                child = (c2 - np.where(cw > 0, c1 * c1 / cw, 0.0)
                         + r2 - np.where(rw > 0, r1 * r1 / rw, 0.0))
        gain = np.where(valid, parent - child, -np.inf)
        k = int(np.argmax(gain))  # first maximum: lowest threshold
        if gain[k] > best[0] + 1e-12 * max(1.0, abs(parent)):
            best = (float(gain[k]), j, float((xs[k] + xs[k + 1]) / 2.0))
    return best


def build_tree(X, y, w, classification, max_depth=None, max_leaf_nodes=None,
               splitter="best", min_samples_leaf=1, rng=None):
    """Grow a CART tree best-first; returns node arrays."""
    rng = np.random.default_rng(0) if rng is None else rng
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        wr = w[rows]
        value.append(float(wr @ y[rows] / wr.sum()) if wr.sum() > 0 else float(np.mean(y[rows])))
        return len(feature) - 1

    heap = []
    counter = 0

    def push(node, rows, depth):
        nonlocal counter
        if max_depth is not None and depth >= max_depth:
            return
        if len(rows) < max(2, 2 * min_samples_leaf):
            return
        gain, j, t = _best_split(X, y, w, rows, classification, splitter, rng,
                                 min_samples_leaf)
        if j < 0:
            return
        heapq.heappush(heap, (-gain, counter, node, rows, depth, j, t))
        counter += 1

    root_rows = np.arange(len(y))
    push(new_node(root_rows), root_rows, 0)
    n_leaves = 1
    while heap and (max_leaf_nodes is None or n_leaves < max_leaf_nodes):
        _, _, node, rows, depth, j, t = heapq.heappop(heap)
        mask = X[rows, j] <= t
        lr_, rr_ = rows[mask], rows[~mask]
        feature[node], threshold[node] = j, t
        li, ri = new_node(lr_), new_node(rr_)
        left[node], right[node] = li, ri
        n_leaves += 1
        push(li, lr_, depth + 1)
        push(ri, rr_, depth + 1)
    return (np.array(feature, dtype=int), np.array(threshold, dtype=float),
            np.array(left, dtype=int), np.array(right, dtype=int),
            np.array(value, dtype=float))


class _CARTBase(BaseEstimator):
    _classification = False

    def __init__(self, max_depth=None, max_leaf_nodes=None, class_weight=None,
                 splitter="best", min_samples_leaf=1, random_state=0):
        self.max_depth = max_depth
        self.max_leaf_nodes = max_leaf_nodes
        self.class_weight = class_weight
        self.splitter = splitter
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, X, y=None, feature_names=None, **_):
        A, y, names, _groups = check_Xy(X, y, feature_names)
        if y is None:
            raise ValueError("fit() needs a target")
        if self.max_depth is not None:
            check_scalar(self.max_depth, "max_depth", kind=numbers.Integral, low=1)
        if self.max_leaf_nodes is not None:
            check_scalar(self.max_leaf_nodes, "max_leaf_nodes", kind=numbers.Integral, low=2)
        check_scalar(self.min_samples_leaf, "min_samples_leaf", kind=numbers.Integral, low=1)
        if self.splitter not in ("best", "random"):
            raise ValueError("splitter must be 'best' or 'random'")
        if self.class_weight not in (None, "balanced"):
            raise ValueError("class_weight must be None or 'balanced'")
        if self._classification:
            y = check_binary(y)
            self.classes_ = np.array([0, 1])
        w = (balanced_weights(y) if self._classification and self.class_weight == "balanced"
             else np.ones(len(y)))
        nodes = build_tree(A, y, w, self._classification, self.max_depth, self.max_leaf_nodes,
                           self.splitter, self.min_samples_leaf,
                           np.random.default_rng(self.random_state))
        task = TaskKind.CLASSIFICATION if self._classification else TaskKind.REGRESSION
        self.tree_ = TreeModel(*nodes, task=task, feature_names=tuple(names))
        self.n_features_in_ = len(names)
        return self

    def _checked(self):
        check_is_fitted(self, "tree_")
        return self.tree_


class CARTRegressor(RegressorMixin, _CARTBase):
    """Regression tree grown by variance reduction."""

    def predict(self, X):
        return self._checked().predict(X)


class CARTClassifier(ClassifierMixin, _CARTBase):
    """Binary classification tree grown by Gini reduction."""

    _classification = True

    def predict_proba(self, X):
        p = self._checked().predict(X)
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def fit_cart(data: Dataset, **params) -> TreeModel:
    cls = CARTClassifier if data.task is TaskKind.CLASSIFICATION else CARTRegressor
    return cls(**params).fit(data).tree_
