import numpy as np
import pytest

from gamlab import synthetic
from gamlab.preprocess import fit_apply


def prepared(kind, **params):
    """Generated dataset after preprocessing."""
    return fit_apply(synthetic.make(kind, **params))[1]


def de_boor_basis(x, knots, j, d, degree=None):
    """Scalar Cox-de Boor recursion, written straight from the definition.

    Degree-0 pieces are half-open ``[t_i, t_{i+1})``; the domain's right end
    ``t[n_basis]`` is closed by the last span, one convention for every point.
    """
    t = knots
    degree = d if degree is None else degree
    if d == 0:
        n_basis = len(t) - degree - 1
        if x == t[n_basis]:
            return 1.0 if j == n_basis - 1 else 0.0
        return 1.0 if t[j] <= x < t[j + 1] else 0.0
    out = 0.0
    if t[j + d] != t[j]:
        out += (x - t[j]) / (t[j + d] - t[j]) * de_boor_basis(x, t, j, d - 1, degree)
    if t[j + d + 1] != t[j + 1]:
        out += ((t[j + d + 1] - x) / (t[j + d + 1] - t[j + 1])
                * de_boor_basis(x, t, j + 1, d - 1, degree))
    return out


@pytest.fixture(scope="session")
def mixed_reg():
    return prepared("mixed", n=400, task="regression", seed=3)


@pytest.fixture(scope="session")
def mixed_cls():
    return prepared("mixed", n=400, task="classification", seed=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines after the run."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines.extend(v for k, v in rep.user_properties if k == "acceptance")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
