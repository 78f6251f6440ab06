from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from core.containers import ProblemSpec
from core.errors import InvalidInputError


class InstanceParams(BaseModel):
    """
    Random instance distribution: S = U[0, 1] + shift, floored at `floor`,
    with a uniform unit-mass target.
    """

    min_m: int = Field(2, ge=1)
    max_m: int = Field(10, ge=1)
    min_n: int = Field(2, ge=1)
    max_n: int = Field(8, ge=1)
    max_k: int = Field(3, ge=1)
    shift: float = Field(1.0, ge=0)
    floor: float = Field(1e-3, gt=0)

    @model_validator(mode="after")
    def _ranges(self):
        if self.min_m > self.max_m or self.min_n > self.max_n:
            raise InvalidInputError("instance size ranges are empty")
        return self


def random_similarity(rng: np.random.Generator, m: int, n: int, params: InstanceParams) -> np.ndarray:
    return np.maximum(rng.uniform(0.0, 1.0, size=(m, n)) + params.shift, params.floor)


def random_instance(rng: np.random.Generator, params: InstanceParams, k: Optional[int] = None) -> ProblemSpec:
    """Draw m, n, k (k <= min(m, n, max_k)) and a similarity matrix."""
    m = int(rng.integers(params.min_m, params.max_m + 1))
    n = int(rng.integers(params.min_n, params.max_n + 1))
    if k is None:
        k = int(rng.integers(1, min(params.max_k, m, n) + 1))
    return ProblemSpec.uniform(random_similarity(rng, m, n, params), k)


def serialize_instance(spec: ProblemSpec) -> dict:
    return {"S": spec.S.data.tolist(), "target": spec.target.mass.tolist(), "k": spec.k}
