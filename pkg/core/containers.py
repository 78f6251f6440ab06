"""
Dense numeric containers shared by every module.

All containers are frozen pydantic models. Arrays are copied to float64 on
construction and marked read-only, so instances can be shared between workers.
"""
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.errors import InvalidInputError


class Metric(str, Enum):
    NEG_SQ_EUCLIDEAN = "neg_sq_euclidean"
    NEG_L1 = "neg_l1"
    COSINE = "cosine"
    DOT = "dot"
    RAW = "raw"

    @property
    def code(self) -> int:
        return list(Metric).index(self)

    @classmethod
    def from_code(cls, code: int) -> "Metric":
        members = list(cls)
        if not 0 <= code < len(members):
            raise InvalidInputError(f"Unknown metric code {code}")
        return members[code]


class SolverMode(str, Enum):
    EXACT = "exact"
    ENTROPIC = "entropic"


def _frozen_array(value, ndim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


class _Frozen(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class SimilarityMatrix(_Frozen):
    """Nonnegative m x n similarity scores, with the shift that produced them from a cost."""

    data: np.ndarray
    beta: float = 0.0
    source_metric: Metric = Metric.RAW

    @field_validator("data", mode="before")
    @classmethod
    def _check_data(cls, value):
        arr = _frozen_array(value, 2, "similarity data")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"similarity matrix must be at least 1x1, got {arr.shape}")
        if np.any(arr < 0):
            raise InvalidInputError("similarity entries must be nonnegative")
        return arr

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def restrict(self, rows) -> np.ndarray:
        """Rows of S for the given source indices, in the given order."""
        idx = np.asarray(list(rows), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.rows):
            raise InvalidInputError(f"row index out of range [0, {self.rows})")
        return self.data[idx]


class Marginal(_Frozen):
    """Nonnegative mass vector. The sum is tracked, not forced to 1."""

    mass: np.ndarray
    total: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _fill_total(cls, values):
        if isinstance(values, dict):
            mass = _frozen_array(values.get("mass"), 1, "marginal mass")
            if mass.size == 0:
                raise InvalidInputError("marginal must have at least one entry")
            if np.any(mass < 0):
                raise InvalidInputError("marginal entries must be nonnegative")
            values = {**values, "mass": mass}
            if not values.get("total"):
                values["total"] = float(mass.sum())
        return values

    @model_validator(mode="after")
    def _check_total(self):
        recomputed = float(self.mass.sum())
        if abs(recomputed - self.total) > 1e-12 * max(1.0, abs(recomputed)):
            raise InvalidInputError(f"marginal total {self.total} does not match sum {recomputed}")
        return self

    @classmethod
    def of(cls, mass) -> "Marginal":
        return cls(mass=mass)

    @property
    def size(self) -> int:
        return self.mass.shape[0]


class Coupling(_Frozen):
    """Transport plan gamma with its row and column sums."""

    plan: np.ndarray
    row_sums: Optional[np.ndarray] = None
    col_sums: Optional[np.ndarray] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_sums(cls, values):
        if isinstance(values, dict):
            plan = np.array(values.get("plan"), dtype=np.float64, copy=True)
            if plan.ndim != 2:
                raise InvalidInputError(f"coupling must be 2-dimensional, got shape {plan.shape}")
            if np.any(plan < 0) or not np.all(np.isfinite(plan)):
                raise InvalidInputError("coupling entries must be finite and nonnegative")
            plan.setflags(write=False)
            row_sums = plan.sum(axis=1)
            col_sums = plan.sum(axis=0)
            row_sums.setflags(write=False)
            col_sums.setflags(write=False)
            values = {"plan": plan, "row_sums": row_sums, "col_sums": col_sums}
        return values

    @classmethod
    def of(cls, plan) -> "Coupling":
        return cls(plan=plan)

    @classmethod
    def empty(cls, n: int) -> "Coupling":
        return cls(plan=np.zeros((0, n)))

    @property
    def shape(self) -> tuple:
        return self.plan.shape


class SolverConfig(_Frozen):
    """Exact or entropic solver settings. max_iter=None defers to the size table."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(0.01, gt=0, alias="lambda")
    max_iter: Optional[int] = Field(None, ge=1)
    tol: float = Field(1e-6, gt=0)
    mode: SolverMode = SolverMode.ENTROPIC

    @classmethod
    def exact(cls) -> "SolverConfig":
        return cls(mode=SolverMode.EXACT)

    @classmethod
    def entropic(cls, lambda_: float = 0.01, max_iter: Optional[int] = None, tol: float = 1e-6) -> "SolverConfig":
        return cls(lambda_=lambda_, max_iter=max_iter, tol=tol, mode=SolverMode.ENTROPIC)

    @staticmethod
    def default_max_iter(source_size: int) -> int:
        if source_size <= 200:
            return 100
        if source_size <= 1000:
            return 1000
        if source_size <= 4000:
            return 2000
        return 4000

    def iterations_for(self, source_size: int) -> int:
        return self.max_iter if self.max_iter is not None else self.default_max_iter(source_size)


class ProblemSpec(_Frozen):
    """A similarity matrix, a target marginal over its columns and a budget."""

    S: SimilarityMatrix
    target: Marginal
    k: int

    @model_validator(mode="after")
    def _check(self):
        if not 1 <= self.k <= self.S.rows:
            raise InvalidInputError(f"budget k={self.k} must lie in [1, {self.S.rows}]")
        if self.target.size != self.S.cols:
            raise InvalidInputError(
                f"target has {self.target.size} entries but S has {self.S.cols} columns"
            )
        if np.any(self.target.mass <= 0):
            raise InvalidInputError("target marginal entries must be strictly positive")
        return self

    @classmethod
    def uniform(cls, S, k: int) -> "ProblemSpec":
        """Uniform unit-mass target over the columns of S."""
        if not isinstance(S, SimilarityMatrix):
            S = SimilarityMatrix(data=S)
        from core.similarity import uniform_marginal

        return cls(S=S, target=uniform_marginal(S.cols, 1.0), k=k)

    @property
    def m(self) -> int:
        return self.S.rows

    @property
    def n(self) -> int:
        return self.S.cols

    def capacity(self, size: int) -> np.ndarray:
        """Target marginal rescaled to total mass `size` (k/n * 1 for uniform targets)."""
        return self.target.mass * (size / self.target.total)
