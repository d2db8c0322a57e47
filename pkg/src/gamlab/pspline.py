"""Penalized B-spline GAM.

Each numeric feature gets a cubic B-spline basis on equally spaced knots and a
second-difference penalty on its coefficients.  Indicator columns of a
categorical feature enter as unpenalized linear columns.  The identity link is
one penalized least-squares solve; the logistic link runs penalized IRLS.
"""

from __future__ import annotations

import logging
import numbers
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from ._validation import check_scalar
from .base import AdditiveClassifierMixin, AdditiveEstimator, AdditiveRegressorMixin
from .core import (
    AdditiveModel, Affine, CategoryTable, Dataset, LinkKind, ModelFamily,
    ShapeFunction, SplineCurve, TaskKind, bspline_design, center_shapes,
)

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    """The penalized normal equations are not positive definite."""

    def __init__(self, message, blocks=()):
        super().__init__(message)
        self.blocks = tuple(blocks)


@dataclass(frozen=True)
class BSplineBasis:
    """B-spline basis on a uniform extended knot vector."""

    knots: np.ndarray
    degree: int
    n_basis: int

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[self.n_basis])

    def design(self, x) -> np.ndarray:
        lo, hi = self.domain
        return bspline_design(np.clip(np.asarray(x, dtype=float), lo, hi),
                              self.knots, self.degree)


def build_basis(values, n_splines: int, degree: int = 3) -> BSplineBasis:
    """Equally spaced knots with boundary knots at the data range.

    ``n_splines - degree`` intervals cover ``[min, max]``; ``degree`` extra
    knots are added on each side at the same spacing.
    """
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if n_splines < degree + 1:
        raise ValueError(f"n_splines={n_splines} must be at least degree + 1 = {degree + 1}")
    if values.size == 0 or values.min() == values.max():
        raise ValueError("cannot build a spline basis on fewer than two distinct values")
    lo, hi = float(values.min()), float(values.max())
    n_int = n_splines - degree
    h = (hi - lo) / n_int
    knots = lo + h * np.arange(-degree, n_int + degree + 1, dtype=float)
    # pin the boundary knots exactly to the data range
    knots[degree] = lo
    knots[degree + n_int] = hi
    return BSplineBasis(knots=knots, degree=degree, n_basis=n_splines)


def difference_matrix(n: int, order: int = 2) -> np.ndarray:
    return np.diff(np.eye(n), n=order, axis=0)


def _sum_zero_basis(k: int) -> np.ndarray:
    """Orthonormal ``(k, k-1)`` basis of vectors orthogonal to the all-ones vector."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(k), np.eye(k)[:, : k - 1]]))
    return q[:, 1:]


@dataclass
class _Block:
    name: str
    columns: list[str]
    kind: str  # "spline" | "category" | "linear"
    design: np.ndarray  # reparametrized (n, m) block
    z: np.ndarray  # (k, m) maps reduced coefficients to basis coefficients
    penalty: np.ndarray  # (m, m)
    basis: BSplineBasis | None = None
    levels: tuple[str, ...] = ()


def _build_blocks(X, names, groups, n_splines, degree, lam):
    index = {n: i for i, n in enumerate(names)}
    grouped = {c for cols in groups.values() for c in cols}
    blocks = []
    # features keep input order; a categorical block sits at its first column
    emitted = set()
    for name in names:
        if name in grouped:
            src = next(s for s, cols in groups.items() if name in cols)
            if src in emitted:
                continue
            emitted.add(src)
            cols = groups[src]
            G = X[:, [index[c] for c in cols]]
            if len(cols) == 1 and np.ptp(G) == 0:
                continue
            row_sums = G.sum(axis=1)
            if len(cols) > 1 and np.allclose(row_sums, row_sums[0]):
                z = _sum_zero_basis(len(cols))
            else:
                z = np.eye(len(cols))
            prefix = f"{src}="
            levels = tuple(c[len(prefix):] if c.startswith(prefix) else c for c in cols)
            m = z.shape[1]
            blocks.append(_Block(src, list(cols), "category", G @ z, z,
                                 np.zeros((m, m)), levels=levels))
            continue
        x = X[:, index[name]]
        n_distinct = len(np.unique(x))
        if n_distinct < 2:
            # constant on the fit data: nothing to learn
            continue
        if n_distinct == 2:
            z = np.eye(1)
            blocks.append(_Block(name, [name], "linear", x[:, None], z, np.zeros((1, 1))))
            continue
        basis = build_basis(x, n_splines, degree)
        B = basis.design(x)
        z = _sum_zero_basis(basis.n_basis)
        D = difference_matrix(basis.n_basis, 2)
        P = lam * (z.T @ D.T @ D @ z)
        blocks.append(_Block(name, [name], "spline", B @ z, z, P, basis=basis))
    return blocks


def _assemble(blocks, n):
    Xd = np.column_stack([np.ones(n)] + [b.design for b in blocks])
    P = scipy.linalg.block_diag(np.zeros((1, 1)), *[b.penalty for b in blocks])
    return Xd, P


def _block_slices(blocks):
    out, start = [], 1
    for b in blocks:
        m = b.design.shape[1]
        out.append(slice(start, start + m))
        start += m
    return out


def _diagnose(blocks, gram):
    """Names of blocks whose own diagonal sub-system is (near) singular."""
    bad = []
    for b, sl in zip(blocks, _block_slices(blocks)):
        sub = gram[sl, sl]
        ev = np.linalg.eigvalsh(sub)
        if ev[0] <= 1e-10 * max(ev[-1], 1e-300):
            bad.append(b.name)
    return bad


def _solve_spd(A, rhs, blocks):
    try:
        c, lower = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        c = None
    if c is not None:
        d = np.diag(c) ** 2
        if d.min() > 1e-12 * d.max():
            return scipy.linalg.cho_solve((c, lower), rhs, check_finite=False)
    bad = _diagnose(blocks, A)
    where = f" in feature block(s) {bad}" if bad else " (collinear feature blocks)"
    raise SingularSystemError(f"penalized system is singular{where}", bad)


def _logistic_deviance(y, eta):
    # -2 log-likelihood, computed stably
    return 2.0 * float(np.sum(np.logaddexp(0.0, eta) - y * eta))


def _penalized_irls(Xd, P, y, blocks, max_iter, tol):
    """Minimise deviance + theta' P theta; returns theta, converged, history."""
    n = len(y)
    p_mean = np.clip(y.mean(), 1e-3, 1 - 1e-3)
    theta = np.zeros(Xd.shape[1])
    theta[0] = np.log(p_mean / (1 - p_mean))
    eta = Xd @ theta
    obj = _logistic_deviance(y, eta) + theta @ P @ theta
    history = [float(obj)]
    converged = False
    for _ in range(max_iter):
        mu = expit(eta)
        w = np.clip(mu * (1 - mu), 1e-6, None)
        z = eta + (y - mu) / w
        XtW = Xd.T * w
        new = _solve_spd(XtW @ Xd + P, XtW @ z, blocks)
        step = new - theta
        t = 1.0
        while True:
            cand = theta + t * step
            eta_c = Xd @ cand
            obj_c = _logistic_deviance(y, eta_c) + cand @ P @ cand
            if obj_c <= obj + 1e-8 * max(1.0, abs(obj)):
                break
            t *= 0.5
            if t < 1e-10:
                cand = None
                break
        if cand is None:
            # no descent direction left: the current iterate is the optimum
            converged = True
            break
        change = np.max(np.abs(cand - theta))
        theta, eta, obj = cand, eta_c, obj_c
        history.append(float(obj))
        if change < tol:
            converged = True
            break
    if not converged:
        log.warning("penalized IRLS did not converge in %d iterations (n=%d)", max_iter, n)
    return theta, converged, history


def _fit(X, y, names, groups, link, n_splines, lam, degree, max_irls_iters, irls_tol):
    blocks = _build_blocks(X, names, groups, n_splines, degree, lam)
    Xd, P = _assemble(blocks, len(y))
    if link is LinkKind.IDENTITY:
        theta = _solve_spd(Xd.T @ Xd + P, Xd.T @ y, blocks)
        converged, history = True, []
    else:
        theta, converged, history = _penalized_irls(
            Xd, P, y, blocks, max_irls_iters, irls_tol)

    shapes = []
    for b, sl in zip(blocks, _block_slices(blocks)):
        coef = b.z @ theta[sl]
        if b.kind == "spline":
            r = SplineCurve(b.basis.knots, coef, b.basis.degree)
        elif b.kind == "category":
            r = CategoryTable(b.levels, coef)
        else:
            col = X[:, names.index(b.name)]
            r = Affine(float(coef[0]), 0.0, (float(col.min()), float(col.max())))
        shapes.append(ShapeFunction(b.name, tuple(b.columns), r))
    shapes, _, offset = center_shapes(shapes, (), X, names)
    meta = {"converged": bool(converged), "penalized_objective_history": history,
            "n_splines": int(n_splines), "lam": float(lam), "degree": int(degree)}
    model = AdditiveModel(
        intercept=float(theta[0] + offset), shapes=shapes, interactions=(),
        link=link, family=ModelFamily.PSPLINE, feature_names=tuple(names), metadata=meta)
    return model


class _PSplineBase(AdditiveEstimator):
    def __init__(self, n_splines=20, lam=0.6, degree=3, max_irls_iters=100, irls_tol=1e-8):
        self.n_splines = n_splines
        self.lam = lam
        self.degree = degree
        self.max_irls_iters = max_irls_iters
        self.irls_tol = irls_tol

    def _validate_params(self):
        check_scalar(self.degree, "degree", kind=numbers.Integral, low=1)
        check_scalar(self.n_splines, "n_splines", kind=numbers.Integral, low=self.degree + 1)
        check_scalar(self.lam, "lam", low=0.0)
        check_scalar(self.max_irls_iters, "max_irls_iters", kind=numbers.Integral, low=1)
        check_scalar(self.irls_tol, "irls_tol", low=0.0, low_open=True)

    def _fit(self, X, y, names, groups):
        model = _fit(X, y, names, groups, self._link, self.n_splines, float(self.lam),
                     self.degree, self.max_irls_iters, self.irls_tol)
        self.converged_ = model.metadata["converged"]
        return model


class PSplineRegressor(AdditiveRegressorMixin, _PSplineBase):
    """P-spline GAM with identity link.

    Parameters
    ----------
    n_splines : int, default=20
        Basis functions per numeric feature.
    lam : float, default=0.6
        Weight of the second-difference penalty, shared by all features.
    degree : int, default=3
        Spline degree.
    max_irls_iters, irls_tol
        Unused for regression; kept so both estimators share parameters.
    """


class PSplineClassifier(AdditiveClassifierMixin, _PSplineBase):
    """P-spline GAM with logistic link fitted by penalized IRLS.

    ``converged_`` is False when IRLS hit ``max_irls_iters``; the last
    accepted iterate is kept.
    """


def fit_pspline(data: Dataset, **params) -> AdditiveModel:
    """Fit a P-spline GAM on a preprocessed dataset."""
    cls = PSplineClassifier if data.task is TaskKind.CLASSIFICATION else PSplineRegressor
    return cls(**params).fit(data).model_
