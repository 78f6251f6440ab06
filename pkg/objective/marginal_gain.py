"""
Approximate marginal gain with the current coupling frozen.

Adding row j to P with the rows of P fixed leaves the LP

    max <S_j, v>   s.t.  v >= 0,  v^T 1 = 1,  v <= b,

with b the remaining target capacity. Its optimum fills columns in decreasing
order of S_j until one unit of mass is placed, so it only needs the row sorted.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from core.containers import Coupling, SimilarityMatrix
from core.errors import BudgetError, CapacityError, InvalidInputError
from core.logger import get_logger

logger = get_logger("objective")

RENORMALIZE_BAND = 1e-6


class CapacityVector(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    b: np.ndarray
    total: float
    clamped: float = 0.0

    @classmethod
    def of(cls, b, clamped: float = 0.0) -> "CapacityVector":
        arr = np.array(b, dtype=np.float64, copy=True)
        if np.any(arr < 0):
            raise InvalidInputError("capacity entries must be nonnegative")
        arr.setflags(write=False)
        return cls(b=arr, total=float(arr.sum()), clamped=clamped)


class AlphaBound(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha_min: np.ndarray
    alpha_max: np.ndarray
    alpha: float
    block: int

    def ratio(self, row: int) -> float:
        if self.alpha_max[row] == 0:
            return 1.0
        return float(self.alpha_min[row] / self.alpha_max[row])


def remaining_capacity(k: int, n: int, gamma_P: Optional[Coupling] = None,
                       cap: Optional[np.ndarray] = None) -> CapacityVector:
    """
    b = k/n * 1 - gamma_P^T 1, clamped at zero.

    Args:
        cap: full capacity vector when the target is not uniform (defaults to k/n * 1).
    """
    full = np.full(n, k / n) if cap is None else np.asarray(cap, dtype=np.float64)
    if full.shape != (n,):
        raise InvalidInputError(f"capacity must have {n} entries")
    if gamma_P is None or gamma_P.plan.shape[0] == 0:
        return CapacityVector.of(full)
    if gamma_P.plan.shape[1] != n:
        raise InvalidInputError(f"coupling has {gamma_P.plan.shape[1]} columns, expected {n}")

    raw = full - gamma_P.col_sums
    clamped = float(np.sum(np.maximum(-raw, 0.0)))
    if clamped > 0:
        logger.debug("remaining capacity clamped by %.3e", clamped)
    return CapacityVector.of(np.maximum(raw, 0.0), clamped=clamped)


def _usable_capacity(b: CapacityVector) -> np.ndarray:
    if b.total >= 1.0:
        return b.b
    if b.total >= 1.0 - RENORMALIZE_BAND:
        return b.b / b.total
    raise CapacityError(f"remaining capacity {b.total:.9f} cannot hold one more prototype")


def _fill(filled: np.ndarray) -> np.ndarray:
    """Place one unit of mass along the last axis, capacities already in descending-score order."""
    before = np.cumsum(filled, axis=-1) - filled
    return np.clip(np.minimum(filled, 1.0 - before), 0.0, None)


def approx_gain(S_row, b: CapacityVector) -> Tuple[float, np.ndarray]:
    """
    Closed-form approximate gain of one candidate row.

    Returns:
        (value, v): the LP optimum and the column masses v placed by the new row.
    """
    row = np.asarray(S_row, dtype=np.float64).ravel()
    if row.shape[0] != b.b.shape[0]:
        raise InvalidInputError(f"row has {row.shape[0]} entries, capacity has {b.b.shape[0]}")
    cap = _usable_capacity(b)
    order = np.argsort(-row, kind="stable")
    v = np.zeros_like(row)
    v[order] = _fill(cap[order])
    return float(np.dot(row, v)), v


class SortedRows:
    """
    Per-row descending orderings of S, computed once and reused by every greedy step.

    Ties are ordered by ascending column index.
    """

    def __init__(self, S: Union[SimilarityMatrix, np.ndarray]):
        data = S.data if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
        self.order = np.argsort(-data, axis=1, kind="stable")
        self.sorted = np.take_along_axis(data, self.order, axis=1)

    def gains(self, b: CapacityVector, rows: Optional[Sequence[int]] = None) -> np.ndarray:
        """Approximate gains of the given rows (all rows when None) under capacity b."""
        cap = _usable_capacity(b)
        order = self.order if rows is None else self.order[np.asarray(rows, dtype=np.int64)]
        values = self.sorted if rows is None else self.sorted[np.asarray(rows, dtype=np.int64)]
        return np.sum(values * _fill(cap[order]), axis=1)

    def fill(self, row: int, b: CapacityVector) -> np.ndarray:
        """The v placed by one row, in original column order."""
        cap = _usable_capacity(b)
        v = np.zeros(cap.shape[0])
        v[self.order[row]] = _fill(cap[self.order[row]])
        return v


def alpha_bound(S: Union[SimilarityMatrix, np.ndarray], k: int) -> AlphaBound:
    """
    Per-row averages of the floor(n/k) smallest and largest similarities, and
    alpha = min over rows of their ratio (0/0 counts as 1).
    """
    data = S.data if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    data = np.atleast_2d(data)
    n = data.shape[1]
    if k < 1 or k > n:
        raise BudgetError(f"alpha bound needs 1 <= k <= n, got k={k}, n={n}")
    block = n // k
    ascending = np.sort(data, axis=1)
    alpha_min = ascending[:, :block].mean(axis=1)
    alpha_max = ascending[:, n - block:].mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(alpha_max > 0, alpha_min / alpha_max, 1.0)
    return AlphaBound(alpha_min=alpha_min, alpha_max=alpha_max, alpha=float(ratios.min()), block=block)
