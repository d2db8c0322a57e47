"""Seeded synthetic datasets with known additive structure.

Every generator returns a raw :class:`Dataset` (not preprocessed) and is a
pure function of its arguments.
"""

from __future__ import annotations

import numpy as np

from .core import Column, ColumnKind, Dataset, TaskKind


def _numeric(name, values):
    return Column(name, ColumnKind.NUMERIC, values)


def sine(n: int = 2000, noise: float = 0.1, seed: int = 0) -> Dataset:
    """``y = sin(2 pi x) + e`` with ``x ~ U(0, 1)``."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, n)
    y = np.sin(2 * np.pi * x) + rng.normal(0.0, noise, n)
    return Dataset("sine", [_numeric("x", x)], y, TaskKind.REGRESSION, "y")


def linear(n: int = 1000, noise: float = 0.1, seed: int = 0) -> Dataset:
    """``y = x0 - 2 x1 + 0.5 x2 + e``."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(0.0, noise, n)
    return Dataset("linear", [_numeric(f"x{j}", X[:, j]) for j in range(3)], y,
                   TaskKind.REGRESSION, "y")


def sine_step(n: int = 1000, noise: float = 0.1, seed: int = 0) -> Dataset:
    """``y = sin(3 x0) + 1[x1 > 0.2] + 0.5 x2 + e``."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, 3))
    y = np.sin(3 * X[:, 0]) + (X[:, 1] > 0.2) + 0.5 * X[:, 2] + rng.normal(0.0, noise, n)
    return Dataset("sine_step", [_numeric(f"x{j}", X[:, j]) for j in range(3)], y,
                   TaskKind.REGRESSION, "y")


def interaction(n: int = 1000, noise: float = 0.1, seed: int = 0) -> Dataset:
    """``y = x0 * x1 + sin(3 x2) + e``."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, 3))
    y = X[:, 0] * X[:, 1] + np.sin(3 * X[:, 2]) + rng.normal(0.0, noise, n)
    return Dataset("interaction", [_numeric(f"x{j}", X[:, j]) for j in range(3)], y,
                   TaskKind.REGRESSION, "y")


def density_imbalanced(n: int = 1000, noise: float = 0.3, seed: int = 0,
                       cut: float = 0.8, ratio: float = 10.0) -> Dataset:
    """``y = sin(2 pi x) + e`` where ``x > cut`` is ``ratio`` times sparser."""
    rng = np.random.default_rng(seed)
    p_sparse = (1 - cut) / ratio / (cut + (1 - cut) / ratio)
    sparse = rng.uniform(size=n) < p_sparse
    x = np.where(sparse, rng.uniform(cut, 1.0, n), rng.uniform(0.0, cut, n))
    y = np.sin(2 * np.pi * x) + rng.normal(0.0, noise, n)
    return Dataset("density_imbalanced", [_numeric("x", x)], y, TaskKind.REGRESSION, "y")


def mixed(n: int = 600, noise: float = 0.2, seed: int = 0, task="regression",
          missing: float = 0.02) -> Dataset:
    """Two numerics, one three-level categorical, a few missing values.

    Regression: ``y = sin(2 x0) + 0.5 x1 + effect(color) + e``.
    Classification: the same score drives a logistic draw.
    """
    task = TaskKind(task)
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.5, 1.5, (n, 2))
    levels = np.array(["red", "green", "blue"], dtype=object)
    color = levels[rng.integers(0, 3, n)]
    effect = np.select([color == "red", color == "green"], [0.8, -0.4], 0.0)
    score = np.sin(2 * X[:, 0]) + 0.5 * X[:, 1] + effect
    if task is TaskKind.REGRESSION:
        y = score + rng.normal(0.0, noise, n)
    else:
        y = (rng.uniform(size=n) < 1 / (1 + np.exp(-2 * score))).astype(float)
    x0 = X[:, 0].copy()
    x0[rng.uniform(size=n) < missing] = np.nan
    color = color.copy()
    color[rng.uniform(size=n) < missing] = None
    cols = [_numeric("x0", x0), _numeric("x1", X[:, 1]),
            Column("color", ColumnKind.CATEGORICAL, color)]
    return Dataset(f"mixed_{task.value}", cols, y, task, "y")


GENERATORS = {
    "sine": sine,
    "linear": linear,
    "sine_step": sine_step,
    "interaction": interaction,
    "density_imbalanced": density_imbalanced,
    "mixed": mixed,
}


def make(kind: str, **params) -> Dataset:
    """Dispatch to a generator by name."""
    if kind not in GENERATORS:
        raise ValueError(f"unknown synthetic dataset {kind!r}; known: {sorted(GENERATORS)}")
    return GENERATORS[kind](**params)
