"""GAM grown from a linear model by boosting extreme learning machines.

Stage 0 is a ridge linear model, so every shape starts as a straight line.
Each boosting round draws a fresh random hidden layer per feature (so every
hidden unit sees one feature only), fits all output weights jointly to the
current gradient in closed form, and adds a damped copy of each feature's
partial function to that feature's shape.  Shapes are kept as piecewise-linear
values on a fixed grid, and the training scores are updated from that grid so
the stored model is exactly the one that was validated.
"""

from __future__ import annotations

import logging
import numbers

import numpy as np
import scipy.linalg
from scipy.special import expit

from ._validation import check_scalar
from .base import AdditiveClassifierMixin, AdditiveEstimator, AdditiveRegressorMixin
from .core import (
    AdditiveModel, Dataset, InteractionSurface, LinkKind, ModelFamily, PiecewiseLinear,
    ShapeFunction, TaskKind, center_shapes, merge_indicator_shapes,
)
from .tree_gam import _split, bin_feature, bin_index, interaction_strengths

log = logging.getLogger(__name__)

GRID_POINTS = 256


def elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def _ridge(A, b, penalty, weights=None):
    """Solve ``(A' W A + penalty I) x = A' W b``."""
    Aw = A.T if weights is None else A.T * weights
    lhs = Aw @ A
    lhs[np.diag_indices_from(lhs)] += penalty
    return scipy.linalg.solve(lhs, Aw @ b, assume_a="pos")


def _linear_init(X, y, logistic, penalty, max_iter=50):
    """Ridge (or ridge-logistic) linear model; the intercept is unpenalized."""
    n, p = X.shape
    A = np.column_stack([np.ones(n), X])
    pen = np.full(p + 1, penalty)
    pen[0] = 0.0
    if not logistic:
        lhs = A.T @ A + np.diag(pen)
        return scipy.linalg.solve(lhs, A.T @ y, assume_a="sym")
    m = min(max(y.mean(), 1e-6), 1 - 1e-6)
    theta = np.zeros(p + 1)
    theta[0] = np.log(m / (1 - m))

    def obj(t):
        eta = A @ t
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta) + 0.5 * np.sum(pen * t * t))

    cur = obj(theta)
    for _ in range(max_iter):
        mu = expit(A @ theta)
        w = np.maximum(mu * (1 - mu), 1e-6)
        grad = A.T @ (y - mu) - pen * theta
        H = (A.T * w) @ A + np.diag(pen) + 1e-10 * np.eye(p + 1)
        step = scipy.linalg.solve(H, grad, assume_a="sym")
        t = 1.0
        while t > 1e-8:
            new = theta + t * step
            val = obj(new)
            if val <= cur:
                break
            t *= 0.5
        else:
            break
        done = np.max(np.abs(new - theta)) < 1e-10
        theta, cur = new, val
        if done:
            break
    return theta


def _loss(y, f, logistic):
    if logistic:
        return float(np.mean(np.logaddexp(0.0, f) - y * f))
    return float(np.mean((y - f) ** 2))


class _ElmGAMBase(AdditiveEstimator):
    def __init__(self, boost_rate=0.1, elm_scale=1.0, interactions=0, n_hidden=10,
                 n_boost_rounds=500, ridge_penalty=1.0, init_penalty=1e-8,
                 early_stop_rounds=50, validation_fraction=0.15, interaction_bins=32,
                 sparse=False, random_state=0):
        self.boost_rate = boost_rate
        self.elm_scale = elm_scale
        self.interactions = interactions
        self.n_hidden = n_hidden
        self.n_boost_rounds = n_boost_rounds
        self.ridge_penalty = ridge_penalty
        self.init_penalty = init_penalty
        self.early_stop_rounds = early_stop_rounds
        self.validation_fraction = validation_fraction
        self.interaction_bins = interaction_bins
        self.sparse = sparse
        self.random_state = random_state

    def _validate_params(self):
        I = numbers.Integral
        check_scalar(self.boost_rate, "boost_rate", low=0.0, low_open=True)
        check_scalar(self.elm_scale, "elm_scale", low=0.0, low_open=True)
        check_scalar(self.interactions, "interactions", kind=I, low=0)
        check_scalar(self.n_hidden, "n_hidden", kind=I, low=1)
        check_scalar(self.n_boost_rounds, "n_boost_rounds", kind=I, low=0)
        check_scalar(self.ridge_penalty, "ridge_penalty", low=0.0, low_open=True)
        check_scalar(self.init_penalty, "init_penalty", low=0.0)
        check_scalar(self.early_stop_rounds, "early_stop_rounds", kind=I, low=1)
        check_scalar(self.validation_fraction, "validation_fraction", low=0.0, high=0.5,
                     low_open=True)
        check_scalar(self.interaction_bins, "interaction_bins", kind=I, low=2)
        if not isinstance(self.sparse, bool):
            raise TypeError("sparse must be a bool")

    def _gradient(self, y, f, logistic):
        g = y - expit(f) if logistic else y - f
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient during boosting")
        return g

    def _fit(self, X, y, names, groups):
        logistic = self._link is LinkKind.LOGISTIC
        rng = np.random.default_rng(self.random_state)
        n, p = X.shape
        fit, val = self._split(n, y, logistic, rng)
        Xf, Xv, yf, yv = X[fit], X[val], y[fit], y[val]

        theta = _linear_init(Xf, yf, logistic, self.init_penalty)
        lo, hi = X.min(axis=0), X.max(axis=0)
        grids = [np.linspace(lo[j], hi[j], GRID_POINTS) for j in range(p)]
        values = [theta[1 + j] * grids[j] for j in range(p)]
        intercept = float(theta[0])
        f_fit = intercept + Xf @ theta[1:]
        f_val = intercept + Xv @ theta[1:]
        self.linear_coef_ = theta[1:].copy()

        history = [_loss(yv, f_val, logistic)]
        misses, rounds_used = 0, 0
        s, k = self.elm_scale, self.n_hidden
        for rnd in range(self.n_boost_rounds):
            W = rng.uniform(-s, s, size=(p, k))
            B = rng.uniform(-s, s, size=(p, k))
            hidden = elu(Xf[:, :, None] * W[None] + B[None]).reshape(len(fit), p * k)
            g = self._gradient(yf, f_fit, logistic)
            beta = _ridge(hidden, g, self.ridge_penalty).reshape(p, k)
            deltas = [self.boost_rate * (elu(grids[j][:, None] * W[j] + B[j]) @ beta[j])
                      for j in range(p)]
            df = sum(np.interp(Xf[:, j], grids[j], deltas[j]) for j in range(p))
            dv = sum(np.interp(Xv[:, j], grids[j], deltas[j]) for j in range(p))
            loss = _loss(yv, f_val + dv, logistic)
            if loss < history[-1]:
                for j in range(p):
                    values[j] = values[j] + deltas[j]
                f_fit, f_val = f_fit + df, f_val + dv
                history.append(loss)
                misses, rounds_used = 0, rnd + 1
            else:
                history.append(history[-1])
                misses += 1
                if misses >= self.early_stop_rounds:
                    break

        interactions = []
        if self.interactions > 0 and p >= 2:
            interactions = self._fit_pairs(X, y, names, groups, fit, val, f_fit, f_val,
                                           intercept, grids, values, logistic, rng)

        shapes = [ShapeFunction(name, (name,), PiecewiseLinear(grids[j], values[j]))
                  for j, name in enumerate(names)]
        shapes = merge_indicator_shapes(shapes, groups, X, names)
        shapes, interactions, offset = center_shapes(shapes, interactions, X, names)
        if self.sparse:
            shapes = tuple(sh for sh in shapes if not self._negligible(sh))
        self.n_rounds_ = rounds_used
        self.validation_history_ = history
        meta = {"rounds": int(rounds_used), "sparse": bool(self.sparse)}
        return AdditiveModel(intercept=intercept + offset, shapes=shapes,
                             interactions=interactions, link=self._link,
                             family=ModelFamily.ELM_GAM, feature_names=tuple(names),
                             metadata=meta)

    @staticmethod
    def _negligible(shape, tol=1e-3):
        r = shape.repr
        vals = r.y if isinstance(r, PiecewiseLinear) else r.values
        return float(np.max(np.abs(vals))) < tol

    def _split(self, n, y, logistic, rng):
        for _ in range(100):
            fit, val = _split(n, y, self.validation_fraction, rng, logistic)
            if len(val) == 0 or len(fit) == 0:
                raise ValueError("too few rows for a validation split")
            if not logistic or (len(np.unique(y[val])) == 2 and len(np.unique(y[fit])) == 2):
                return fit, val
        raise ValueError("could not draw a validation split containing both classes")

    def _fit_pairs(self, X, y, names, groups, fit, val, f_fit, f_val, intercept, grids,
                   values, logistic, rng):
        source = {c: src for src, cols in groups.items() for c in cols}
        p = X.shape[1]
        cands = [(i, j) for i in range(p) for j in range(i + 1, p)
                 if source.get(names[i], i) != source.get(names[j], j)]
        f_all = intercept + sum(np.interp(X[:, j], grids[j], values[j]) for j in range(p))
        g = self._gradient(y, f_all, logistic)
        h = expit(f_all) * (1 - expit(f_all)) if logistic else None
        strength = interaction_strengths(X, g, h, self.interaction_bins, cands)
        pairs = sorted(cands, key=lambda pr: (-strength[pr], pr))[: self.interactions]

        edges = [bin_feature(X[:, j], self.interaction_bins) for j in range(p)]
        centers = [(e[:-1] + e[1:]) / 2.0 for e in edges]
        cells, surfaces = [], []
        for a, b in pairs:
            ia, ib = bin_index(edges[a], X[:, a]), bin_index(edges[b], X[:, b])
            cells.append(ia * len(centers[b]) + ib)
            surfaces.append(np.zeros((len(centers[a]), len(centers[b]))))
        yf, yv = y[fit], y[val]
        best = _loss(yv, f_val, logistic)
        s, k, m = self.elm_scale, self.n_hidden, len(pairs)
        misses = 0
        for _ in range(self.n_boost_rounds):
            W = rng.uniform(-s, s, size=(m, 2, k))
            Bv = rng.uniform(-s, s, size=(m, k))
            # hidden units evaluated at the cell centers of each training point
            cell_h = []
            for q, (a, b) in enumerate(pairs):
                ca, cb = np.meshgrid(centers[a], centers[b], indexing="ij")
                z = ca.ravel()[:, None] * W[q, 0] + cb.ravel()[:, None] * W[q, 1] + Bv[q]
                cell_h.append(elu(z))
            hidden = np.column_stack([cell_h[q][cells[q][fit]] for q in range(m)])
            gr = self._gradient(yf, f_fit, logistic)
            beta = _ridge(hidden, gr, self.ridge_penalty).reshape(m, k)
            deltas = [self.boost_rate * (cell_h[q] @ beta[q]) for q in range(m)]
            df = sum(deltas[q][cells[q][fit]] for q in range(m))
            dv = sum(deltas[q][cells[q][val]] for q in range(m))
            loss = _loss(yv, f_val + dv, logistic)
            if loss < best:
                best = loss
                f_fit, f_val = f_fit + df, f_val + dv
                for q in range(m):
                    surfaces[q] = surfaces[q] + deltas[q].reshape(surfaces[q].shape)
                misses = 0
            else:
                misses += 1
                if misses >= self.early_stop_rounds:
                    break
        return tuple(InteractionSurface((names[a], names[b]), (edges[a], edges[b]), surfaces[q])
                     for q, (a, b) in enumerate(pairs))


class ElmGAMRegressor(AdditiveRegressorMixin, _ElmGAMBase):
    """Boosted-ELM GAM with identity link.

    Inputs are expected on a unit scale (the preprocessing standardizes
    numerics); hidden units saturate or stay linear on raw wide ranges.

    Parameters
    ----------
    boost_rate : float, default=0.1
        Damping of every boosting update.
    elm_scale : float, default=1.0
        Hidden weights and biases are drawn from ``U(-elm_scale, elm_scale)``.
    interactions : int, default=0
        Pairwise surfaces appended after the main effects.
    n_hidden : int, default=10
        Hidden units per feature and round.
    n_boost_rounds : int, default=500
    ridge_penalty : float, default=1.0
        Ridge penalty of the output-weight solve.
    init_penalty : float, default=1e-8
        Ridge penalty of the linear start.
    early_stop_rounds : int, default=50
        Consecutive rejected rounds before stopping.  A round is rejected,
        and not applied, when it does not lower the validation loss.
    validation_fraction : float, default=0.15
    interaction_bins : int, default=32
    sparse : bool, default=False
        Drop shapes whose centered sup-norm is below 1e-3.
    random_state : int, default=0
    """


class ElmGAMClassifier(AdditiveClassifierMixin, _ElmGAMBase):
    """Boosted-ELM GAM with logistic link; output weights fit the log-loss gradient."""


def fit_elm_gam(data: Dataset, **params) -> AdditiveModel:
    cls = ElmGAMClassifier if data.task is TaskKind.CLASSIFICATION else ElmGAMRegressor
    return cls(**params).fit(data).model_
