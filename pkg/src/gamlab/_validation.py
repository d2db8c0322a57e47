"""Input validation shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
import pandas as pd

from .core import Dataset


def check_Xy(X, y=None, feature_names=None):
    """Return ``(X, y, names)`` as float arrays plus column names.

    ``X`` may be an array, a DataFrame (names come from its columns) or a
    preprocessed :class:`Dataset` (names and target come from it).
    """
    groups = None
    if isinstance(X, Dataset):
        groups = X.categorical_groups()
        if y is None:
            y = X.target
        names = X.feature_names
        A = X.matrix()
    elif isinstance(X, pd.DataFrame):
        names = [str(c) for c in X.columns]
        A = X.to_numpy(dtype=float)
    else:
        A = np.asarray(X, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        names = None
    if A.ndim != 2:
        raise ValueError(f"X must be two-dimensional, got shape {A.shape}")
    if feature_names is not None:
        names = [str(n) for n in feature_names]
    if names is None:
        names = [f"x{i}" for i in range(A.shape[1])]
    if len(names) != A.shape[1]:
        raise ValueError(f"{len(names)} feature names for {A.shape[1]} columns")
    if len(set(names)) != len(names):
        raise ValueError("feature names must be unique")
    if A.shape[0] == 0:
        raise ValueError("X has no rows")
    if not np.isfinite(A).all():
        raise ValueError("X contains missing or non-finite values; preprocess first")
    if y is not None:
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != A.shape[0]:
            raise ValueError(f"X has {A.shape[0]} rows but y has {len(y)}")
        if not np.isfinite(y).all():
            raise ValueError("y contains missing or non-finite values")
    return A, y, names, groups


def check_binary(y):
    y = np.asarray(y, dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("classification targets must be coded 0/1")
    return y


def check_groups(groups, names):
    """Validate a ``source -> [indicator columns]`` mapping against ``names``."""
    if not groups:
        return {}
    known = set(names)
    out = {}
    seen = set()
    for src, cols in groups.items():
        cols = [str(c) for c in cols]
        bad = [c for c in cols if c not in known]
        if bad:
            raise ValueError(f"categorical group {src!r} names unknown columns {bad}")
        if seen.intersection(cols):
            raise ValueError(f"column(s) {sorted(seen.intersection(cols))} in two groups")
        seen.update(cols)
        out[str(src)] = cols
    return out


def check_scalar(value, name, *, kind=numbers.Real, low=None, high=None,
                 low_open=False, high_open=False):
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {kind.__name__}, got {value!r}")
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if low is not None and (value < low or (low_open and value == low)):
        raise ValueError(f"{name}={value!r} is below the allowed range")
    if high is not None and (value > high or (high_open and value == high)):
        raise ValueError(f"{name}={value!r} is above the allowed range")
    return value


def balanced_weights(y):
    """Per-sample weights ``N / (2 N_class)``; they sum to ``N``."""
    y = np.asarray(y)
    n = len(y)
    n_pos = float(np.sum(y == 1))
    n_neg = n - n_pos
    w = np.empty(n)
    w[y == 1] = n / (2.0 * n_pos) if n_pos else 0.0
    w[y != 1] = n / (2.0 * n_neg) if n_neg else 0.0
    return w
