"""Tree-based GAM fitted by cyclic gradient boosting.

Every feature is binned once.  Boosting visits the features round-robin and
fits a small tree (contiguous groups of bins) to the current gradient of that
feature alone, so the model stays additive and each shape is a step function.
Several outer bags with different validation splits are averaged.  After the
main effects, the strongest feature pairs get 2-D step surfaces boosted on the
remaining residual.
"""

from __future__ import annotations

import itertools
import logging
import numbers

import numpy as np
from scipy.special import expit

from ._validation import check_scalar
from .base import AdditiveClassifierMixin, AdditiveEstimator, AdditiveRegressorMixin
from .core import (
    AdditiveModel, Dataset, InteractionSurface, LinkKind, ModelFamily,
    ShapeFunction, StepFunction, TaskKind, center_shapes, feature_importance,
    merge_indicator_shapes,
)

__all__ = [
    "bin_feature", "bin_index", "interaction_strengths", "TreeGAMRegressor",
    "TreeGAMClassifier", "fit_tree_gam", "feature_importance",
]

log = logging.getLogger(__name__)

HESSIAN_FLOOR = 1e-6


def bin_feature(values, max_bins: int) -> np.ndarray:
    """Quantile bin edges, including the data min and max.

    With at most ``max_bins`` distinct values every value gets its own bin and
    cuts sit at midpoints.  Otherwise cuts are placed between the sorted values
    at ranks ``round(k * N / max_bins)``; cuts that would fall between equal
    values are dropped, so heavy ties merge bins.
    """
    x = np.asarray(values, dtype=float)
    x = np.sort(x[np.isfinite(x)])
    if x.size == 0:
        raise ValueError("cannot bin a feature without finite values")
    if max_bins < 2:
        raise ValueError("max_bins must be at least 2")
    uniq = np.unique(x)
    if len(uniq) <= max_bins:
        cuts = (uniq[:-1] + uniq[1:]) / 2.0
    else:
        n = len(x)
        ranks = np.round(np.arange(1, max_bins) * n / max_bins).astype(int)
        ranks = ranks[(ranks > 0) & (ranks < n)]
        lo, hi = x[ranks - 1], x[ranks]
        cuts = np.unique(((lo + hi) / 2.0)[lo < hi])
    return np.concatenate([[uniq[0]], cuts, [uniq[-1]]])


def bin_index(edges: np.ndarray, x) -> np.ndarray:
    return np.searchsorted(edges[1:-1], x, side="right")


def _best_cut(G, H, C, min_leaf):
    """Best single cut of a contiguous bin range; returns (gain, cut) or (0, None).

    ``cut`` is the number of bins in the left part.
    """
    if len(G) < 2:
        return 0.0, None
    gl, hl, cl = np.cumsum(G), np.cumsum(H), np.cumsum(C)
    gt, ht, ct = gl[-1], hl[-1], cl[-1]
    gl, hl, cl = gl[:-1], hl[:-1], cl[:-1]
    gr, hr, cr = gt - gl, ht - hl, ct - cl
    ok = (cl >= min_leaf) & (cr >= min_leaf)
    if not ok.any():
        return 0.0, None
    hl, hr = np.maximum(hl, HESSIAN_FLOOR), np.maximum(hr, HESSIAN_FLOOR)
    gain = gl * gl / hl + gr * gr / hr - gt * gt / max(ht, HESSIAN_FLOOR)
    gain = np.where(ok, gain, -np.inf)
    k = int(np.argmax(gain))
    if not gain[k] > 0:
        return 0.0, None
    return float(gain[k]), k + 1


def fit_segment_tree(G, H, C, max_leaves=3, min_leaf=2) -> np.ndarray:
    """Best-first tree over ordered bins; returns the Newton value of each bin."""
    segments = [(0, len(G))]
    while len(segments) < max_leaves:
        best = (0.0, None, None)
        for i, (a, b) in enumerate(segments):
            gain, cut = _best_cut(G[a:b], H[a:b], C[a:b], min_leaf)
            if cut is not None and gain > best[0]:
                best = (gain, i, a + cut)
        if best[1] is None:
            break
        a, b = segments.pop(best[1])
        segments[best[1]:best[1]] = [(a, best[2]), (best[2], b)]
    out = np.empty(len(G))
    for a, b in segments:
        out[a:b] = G[a:b].sum() / max(H[a:b].sum(), HESSIAN_FLOOR)
    return out


def _quadrants(c):
    """Sums of the four quadrants for every (row cut, column cut) of a 2-D cumsum."""
    ll = c[:-1, :-1]
    lr = c[:-1, -1:] - ll
    rl = c[-1:, :-1] - ll
    rr = c[-1, -1] - ll - lr - rl
    return ll, lr, rl, rr


def _quadrant_split(G2, H2, C2=None, min_leaf=0):
    """Best cut ``(i, j)`` into four quadrants of a 2-D gradient histogram.

    Returns ``(gain, (i, j))`` where rows ``< i`` and columns ``< j`` form the
    top-left quadrant, or ``(0.0, None)`` when no admissible cut improves.
    """
    if G2.shape[0] < 2 or G2.shape[1] < 2:
        return 0.0, None
    cg = G2.cumsum(0).cumsum(1)
    ch = H2.cumsum(0).cumsum(1)
    gt, ht = cg[-1, -1], ch[-1, -1]
    gain = -gt * gt / max(ht, HESSIAN_FLOOR)
    for g, h in zip(_quadrants(cg), _quadrants(ch)):
        gain = gain + g * g / np.maximum(h, HESSIAN_FLOOR)
    if C2 is not None and min_leaf > 0:
        cc = C2.cumsum(0).cumsum(1)
        ok = np.logical_and.reduce([q >= min_leaf for q in _quadrants(cc)])
        gain = np.where(ok, gain, -np.inf)
    k = np.unravel_index(int(np.argmax(gain)), gain.shape)
    if not gain[k] > 0:
        return 0.0, None
    return float(gain[k]), (int(k[0]) + 1, int(k[1]) + 1)


def _hist2(ia, ib, na, nb, w):
    return np.bincount(ia * nb + ib, weights=w, minlength=na * nb).reshape(na, nb)


def interaction_strengths(X, residual, hessian=None, n_bins=32, pairs=None):
    """Residual gain of the best 4-quadrant split for each feature pair.

    Returns ``{(i, j): gain / N}``, the residual variance (identity link) or
    Newton gain per row that a single 2-D cut explains.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    h = np.ones(n) if hessian is None else np.asarray(hessian, dtype=float)
    idx, sizes = [], []
    for j in range(p):
        e = bin_feature(X[:, j], n_bins)
        idx.append(bin_index(e, X[:, j]))
        sizes.append(len(e) - 1)
    if pairs is None:
        pairs = list(itertools.combinations(range(p), 2))
    out = {}
    for a, b in pairs:
        G2 = _hist2(idx[a], idx[b], sizes[a], sizes[b], residual)
        H2 = _hist2(idx[a], idx[b], sizes[a], sizes[b], h)
        out[(a, b)] = _quadrant_split(G2, H2)[0] / n
    return out


def fit_pair_tree(G2, H2, C2, min_leaf=2) -> np.ndarray:
    """Four-leaf tree on a 2-D histogram: one cut per axis, Newton value per quadrant."""
    _, cut = _quadrant_split(G2, H2, C2, min_leaf)
    if cut is None:
        return np.full(G2.shape, G2.sum() / max(H2.sum(), HESSIAN_FLOOR))
    i, j = cut
    out = np.empty(G2.shape)
    for rs in (slice(0, i), slice(i, None)):
        for cs in (slice(0, j), slice(j, None)):
            out[rs, cs] = G2[rs, cs].sum() / max(H2[rs, cs].sum(), HESSIAN_FLOOR)
    return out


def _loss(y, f, logistic):
    if logistic:
        return float(np.mean(np.logaddexp(0.0, f) - y * f))
    return float(np.mean((y - f) ** 2))


def _grad_hess(y, f, logistic):
    if logistic:
        p = expit(f)
        return y - p, np.maximum(p * (1 - p), HESSIAN_FLOOR)
    return y - f, np.ones_like(y)


def _split(n, y, fraction, rng, stratify):
    """Random fit/validation split; stratified for classification."""
    if stratify:
        val = []
        for cls in (0.0, 1.0):
            rows = np.flatnonzero(y == cls)
            k = int(round(fraction * len(rows)))
            val.append(rng.permutation(rows)[:k])
        val = np.sort(np.concatenate(val))
    else:
        k = max(1, int(round(fraction * n)))
        val = np.sort(rng.permutation(n)[:k])
    mask = np.zeros(n, dtype=bool)
    mask[val] = True
    return np.flatnonzero(~mask), val


class _Booster:
    """Cyclic boosting of one bag."""

    def __init__(self, est, logistic):
        self.est = est
        self.logistic = logistic

    def _boost(self, terms, y, f_fit, f_val, y_val, rng):
        """Generic cyclic loop; ``terms`` provide ``step(g, h, w)`` and ``apply`` hooks."""
        est = self.est
        lr = est.learning_rate
        best_loss = start_loss = _loss(y_val, f_val, self.logistic)
        best_state = [t.snapshot() for t in terms]
        best_round, since = 0, 0
        for rnd in range(1, est.max_rounds + 1):
            for t in terms:
                g, h = _grad_hess(y, f_fit, self.logistic)
                update = t.fit_update(g, h, rng)
                t.add(lr * update)
                f_fit += lr * t.values_at(update, "fit")
                f_val += lr * t.values_at(update, "val")
            loss = _loss(y_val, f_val, self.logistic)
            if loss < best_loss - 1e-12 * max(1.0, abs(best_loss)):
                best_loss, best_round, since = loss, rnd, 0
                best_state = [t.snapshot() for t in terms]
            else:
                since += 1
                if since >= est.early_stop_rounds:
                    break
        for t, s in zip(terms, best_state):
            t.restore(s)
        return best_round, best_loss, start_loss


class _MainTerm:
    def __init__(self, bins_fit, bins_val, n_bins, est):
        self.bf, self.bv, self.n = bins_fit, bins_val, n_bins
        self.values = np.zeros(n_bins)
        self.count = np.bincount(bins_fit, minlength=n_bins).astype(float)
        self.est = est

    def fit_update(self, g, h, rng):
        est = self.est
        if est.inner_bags == 0:
            G = np.bincount(self.bf, weights=g, minlength=self.n)
            H = np.bincount(self.bf, weights=h, minlength=self.n)
            return fit_segment_tree(G, H, self.count, est.max_leaves, est.min_samples_leaf)
        acc = np.zeros(self.n)
        m = len(g)
        for _ in range(est.inner_bags):
            w = np.bincount(rng.integers(0, m, m), minlength=m).astype(float)
            G = np.bincount(self.bf, weights=g * w, minlength=self.n)
            H = np.bincount(self.bf, weights=h * w, minlength=self.n)
            C = np.bincount(self.bf, weights=w, minlength=self.n)
            acc += fit_segment_tree(G, H, C, est.max_leaves, est.min_samples_leaf)
        return acc / est.inner_bags

    def add(self, delta):
        self.values += delta

    def values_at(self, update, which):
        return update[self.bf if which == "fit" else self.bv]

    def snapshot(self):
        return self.values.copy()

    def restore(self, s):
        self.values = s


class _PairTerm:
    def __init__(self, ia_fit, ib_fit, ia_val, ib_val, na, nb, est):
        self.na, self.nb = na, nb
        self.cf = ia_fit * nb + ib_fit
        self.cv = ia_val * nb + ib_val
        self.values = np.zeros((na, nb))
        self.count = np.bincount(self.cf, minlength=na * nb).reshape(na, nb).astype(float)
        self.est = est

    def fit_update(self, g, h, rng):
        size = self.na * self.nb
        G = np.bincount(self.cf, weights=g, minlength=size).reshape(self.na, self.nb)
        H = np.bincount(self.cf, weights=h, minlength=size).reshape(self.na, self.nb)
        return fit_pair_tree(G, H, self.count, self.est.min_samples_leaf)

    def add(self, delta):
        self.values += delta

    def values_at(self, update, which):
        return update.ravel()[self.cf if which == "fit" else self.cv]

    def snapshot(self):
        return self.values.copy()

    def restore(self, s):
        self.values = s


class _TreeGAMBase(AdditiveEstimator):
    def __init__(self, max_bins=256, interactions=10, outer_bags=8, inner_bags=0,
                 learning_rate=0.05, max_rounds=5000, max_leaves=3, early_stop_rounds=50,
                 validation_fraction=0.15, min_samples_leaf=2, interaction_bins=32,
                 monotonize=False, random_state=0):
        self.max_bins = max_bins
        self.interactions = interactions
        self.outer_bags = outer_bags
        self.inner_bags = inner_bags
        self.learning_rate = learning_rate
        self.max_rounds = max_rounds
        self.max_leaves = max_leaves
        self.early_stop_rounds = early_stop_rounds
        self.validation_fraction = validation_fraction
        self.min_samples_leaf = min_samples_leaf
        self.interaction_bins = interaction_bins
        self.monotonize = monotonize
        self.random_state = random_state

    def _validate_params(self):
        I = numbers.Integral
        check_scalar(self.max_bins, "max_bins", kind=I, low=2)
        check_scalar(self.interactions, "interactions", kind=I, low=0)
        check_scalar(self.outer_bags, "outer_bags", kind=I, low=1)
        check_scalar(self.inner_bags, "inner_bags", kind=I, low=0)
        check_scalar(self.learning_rate, "learning_rate", low=0.0, high=1.0, low_open=True)
        check_scalar(self.max_rounds, "max_rounds", kind=I, low=0)
        check_scalar(self.max_leaves, "max_leaves", kind=I, low=2)
        check_scalar(self.early_stop_rounds, "early_stop_rounds", kind=I, low=1)
        check_scalar(self.validation_fraction, "validation_fraction", low=0.0, high=0.5,
                     low_open=True)
        check_scalar(self.min_samples_leaf, "min_samples_leaf", kind=I, low=1)
        check_scalar(self.interaction_bins, "interaction_bins", kind=I, low=2)
        if not isinstance(self.monotonize, bool):
            raise TypeError("monotonize must be a bool")

    def _fit(self, X, y, names, groups):
        logistic = self._link is LinkKind.LOGISTIC
        n, p = X.shape
        edges = [bin_feature(X[:, j], self.max_bins) for j in range(p)]
        bins = np.column_stack([bin_index(e, X[:, j]) for j, e in enumerate(edges)])
        seeds = np.random.SeedSequence(self.random_state).spawn(self.outer_bags + 1)
        splits = [self._bag_split(n, y, logistic, seeds[b]) for b in range(self.outer_bags)]

        # main effects, one boosting run per bag
        bag_main, bag_icpt, rounds, losses = [], [], [], []
        for b, (fit, val) in enumerate(splits):
            rng = np.random.default_rng(seeds[b])
            icpt = self._init_score(y[fit], logistic)
            terms = [_MainTerm(bins[fit, j], bins[val, j], len(edges[j]) - 1, self)
                     for j in range(p)]
            f_fit = np.full(len(fit), icpt)
            f_val = np.full(len(val), icpt)
            r, best, start = _Booster(self, logistic)._boost(terms, y[fit], f_fit, f_val,
                                                             y[val], rng)
            losses.append((start, best))
            bag_main.append([t.values for t in terms])
            bag_icpt.append(icpt)
            rounds.append(r)

        # pair selection on the bag-averaged main-effect model
        pairs = self._select_pairs(X, y, names, groups, bins, bag_main, bag_icpt, logistic)
        bag_pairs = []
        coarse = [bin_feature(X[:, j], self.interaction_bins) for j in range(p)]
        cbins = [bin_index(e, X[:, j]) for j, e in enumerate(coarse)]
        for b, (fit, val) in enumerate(splits):
            if not pairs:
                bag_pairs.append([])
                continue
            rng = np.random.default_rng(seeds[b].spawn(1)[0])
            f_all = bag_icpt[b] + sum(v[bins[:, j]] for j, v in enumerate(bag_main[b]))
            terms = [_PairTerm(cbins[i][fit], cbins[j][fit], cbins[i][val], cbins[j][val],
                               len(coarse[i]) - 1, len(coarse[j]) - 1, self)
                     for i, j in pairs]
            _Booster(self, logistic)._boost(terms, y[fit], f_all[fit].copy(),
                                            f_all[val].copy(), y[val], rng)
            bag_pairs.append([t.values for t in terms])

        self.bag_models_ = [
            self._assemble(X, names, groups, edges, coarse, pairs, [bag_main[b]],
                           [bag_icpt[b]], [bag_pairs[b]], rounds[b:b + 1])
            for b in range(self.outer_bags)]
        self.n_rounds_ = rounds
        self.validation_losses_ = losses
        return self._assemble(X, names, groups, edges, coarse, pairs, bag_main, bag_icpt,
                              bag_pairs, rounds)

    def _bag_split(self, n, y, logistic, seed):
        rng = np.random.default_rng(seed.spawn(1)[0])
        for attempt in range(100):
            fit, val = _split(n, y, self.validation_fraction, rng, logistic)
            if len(val) == 0 or len(fit) == 0:
                raise ValueError("too few rows for a validation split")
            if not logistic or (len(np.unique(y[val])) == 2 and len(np.unique(y[fit])) == 2):
                return fit, val
            rng = np.random.default_rng(seed.entropy + attempt + 1)
        raise ValueError("could not draw a validation split containing both classes")

    @staticmethod
    def _init_score(y, logistic):
        m = float(np.mean(y))
        if logistic:
            m = min(max(m, 1e-6), 1 - 1e-6)
            return float(np.log(m / (1 - m)))
        return m

    def _candidate_pairs(self, names, groups):
        source = {}
        for src, cols in groups.items():
            for c in cols:
                source[c] = src
        return [(i, j) for i, j in itertools.combinations(range(len(names)), 2)
                if source.get(names[i], i) != source.get(names[j], j)]

    def _select_pairs(self, X, y, names, groups, bins, bag_main, bag_icpt, logistic):
        if self.interactions == 0 or X.shape[1] < 2:
            return []
        f = np.mean(bag_icpt) + sum(
            np.mean([bm[j] for bm in bag_main], axis=0)[bins[:, j]] for j in range(X.shape[1]))
        g, h = _grad_hess(y, f, logistic)
        cands = self._candidate_pairs(names, groups)
        strength = interaction_strengths(X, g, h, self.interaction_bins, cands)
        ranked = sorted(cands, key=lambda pr: (-strength[pr], pr))
        self.interaction_strengths_ = {f"{names[a]} x {names[b]}": strength[(a, b)]
                                       for a, b in ranked}
        return ranked[: self.interactions]

    def _assemble(self, X, names, groups, edges, coarse, pairs, bag_main, bag_icpt,
                  bag_pairs, rounds):
        p = X.shape[1]
        main = [np.mean([bm[j] for bm in bag_main], axis=0) for j in range(p)]
        intercept = float(np.mean(bag_icpt))
        shapes = [ShapeFunction(name, (name,), StepFunction(edges[j], main[j]))
                  for j, name in enumerate(names)]
        shapes = merge_indicator_shapes(shapes, groups, X, names)
        inter = []
        for k, (a, b) in enumerate(pairs):
            vals = np.mean([bp[k] for bp in bag_pairs], axis=0)
            inter.append(InteractionSurface((names[a], names[b]), (coarse[a], coarse[b]), vals))
        shapes, inter, offset = center_shapes(shapes, inter, X, names)
        meta = {"outer_bags": len(bag_main), "rounds": [int(r) for r in rounds],
                "monotonize": bool(self.monotonize)}
        return AdditiveModel(intercept=intercept + offset, shapes=shapes, interactions=inter,
                             link=self._link, family=ModelFamily.TREE_GAM,
                             feature_names=tuple(names), metadata=meta)


class TreeGAMRegressor(AdditiveRegressorMixin, _TreeGAMBase):
    """Cyclic-boosted step-function GAM with identity link.

    Parameters
    ----------
    max_bins : int, default=256
        Upper bound on quantile bins per feature.
    interactions : int, default=10
        Number of pairwise interaction surfaces (0 disables them).
    outer_bags : int, default=8
        Boosting runs with different validation splits, averaged.
    inner_bags : int, default=0
        Bootstrap trees averaged inside every boosting step.
    learning_rate : float, default=0.05
    max_rounds : int, default=5000
    max_leaves : int, default=3
        Leaves per feature tree.
    early_stop_rounds : int, default=50
    validation_fraction : float, default=0.15
    min_samples_leaf : int, default=2
    interaction_bins : int, default=32
        Bins per feature of the interaction grid.
    monotonize : bool, default=False
        Recorded in the model metadata only.
    random_state : int, default=0

    Attributes
    ----------
    model_ : AdditiveModel
        Bag-averaged model.
    bag_models_ : list of AdditiveModel
        One model per outer bag; ``model_`` predicts their mean.
    n_rounds_ : list of int
        Selected stopping round of each bag.
    validation_losses_ : list of (float, float)
        Held-out loss of each bag at round 0 and at the stopping round.
    """


class TreeGAMClassifier(AdditiveClassifierMixin, _TreeGAMBase):
    """Cyclic-boosted step-function GAM with logistic link and Newton leaves."""


def fit_tree_gam(data: Dataset, **params) -> AdditiveModel:
    cls = TreeGAMClassifier if data.task is TaskKind.CLASSIFICATION else TreeGAMRegressor
    return cls(**params).fit(data).model_
