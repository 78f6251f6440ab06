import numpy as np
import pytest
from scipy.optimize import linprog

from core.containers import ProblemSpec


def lp_partial(S, row_mass, cap):
    """max <S, x> s.t. x 1 = row_mass, x^T 1 <= cap, x >= 0, solved by HiGHS."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    p, n = S.shape
    rows = np.kron(np.eye(p), np.ones((1, n)))
    cols = np.kron(np.ones((1, p)), np.eye(n))
    res = linprog(-S.ravel(), A_ub=cols, b_ub=np.asarray(cap, dtype=np.float64),
                  A_eq=rows, b_eq=np.full(p, float(row_mass)), bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return -res.fun


def lp_balanced(S, mu, nu):
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    p, n = S.shape
    rows = np.kron(np.eye(p), np.ones((1, n)))
    cols = np.kron(np.ones((1, p)), np.eye(n))
    res = linprog(-S.ravel(), A_eq=np.vstack([rows, cols]), b_eq=np.concatenate([mu, nu]),
                  bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return -res.fun


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def lp():
    return {"partial": lp_partial, "balanced": lp_balanced}


@pytest.fixture
def worked_3x2():
    """Three sources, two targets; greedy picks {0, 1} with f = 6 at k = 2."""
    return ProblemSpec.uniform(np.array([[3.0, 1.0], [1.0, 3.0], [2.0, 2.0]]), 2)


@pytest.fixture
def swap_2x2():
    return ProblemSpec.uniform(np.array([[3.0, 1.0], [1.0, 3.0]]), 2)
