"""
The set functions over prototype sets P of source rows.

    l(P)  facility location: each target column served by its best prototype
    h(P)  balanced OT with one unit per prototype, target rescaled to |P|
    g(P)  h(P) / |P|
    f(P)  partial OT with one unit per prototype, target capacity rescaled to k

With the target marginal normalised to unit mass and uniform, the target of h
is |P|/n * 1 and the capacity of f is k/n * 1.
"""
from enum import Enum
from typing import Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from core.containers import Coupling, ProblemSpec, SolverConfig
from core.errors import BudgetError, EmptySelectionError, InvalidInputError
from transport.transport_solver import ot_exact, solve_pot


class Objective(str, Enum):
    L = "l"
    G = "g"
    H = "h"
    F = "f"


class ObjectiveValue(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    which: Objective
    value: float
    coupling: Optional[Coupling] = None

    @field_validator("value")
    @classmethod
    def _nonnegative(cls, value: float) -> float:
        # exact solvers can return -1e-16 on all-zero rows
        if value < -1e-9:
            raise InvalidInputError(f"objective value must be nonnegative, got {value}")
        return max(value, 0.0)


def index_set(P: Iterable[int], m: int) -> List[int]:
    """Validate a prototype index set, keeping its order."""
    indices = [int(i) for i in P]
    if len(set(indices)) != len(indices):
        raise InvalidInputError(f"prototype indices must be distinct: {indices}")
    for i in indices:
        if not 0 <= i < m:
            raise InvalidInputError(f"prototype index {i} outside [0, {m})")
    return indices


def eval_l(spec: ProblemSpec, P: Iterable[int]) -> ObjectiveValue:
    indices = index_set(P, spec.m)
    if not indices:
        raise EmptySelectionError("l is undefined on the empty set")
    block = spec.S.restrict(indices)
    best = np.argmax(block, axis=0)
    plan = np.zeros_like(block)
    plan[best, np.arange(spec.n)] = spec.target.mass
    value = float(np.dot(spec.target.mass, block[best, np.arange(spec.n)]))
    return ObjectiveValue(which=Objective.L, value=value, coupling=Coupling.of(plan))


def eval_h(spec: ProblemSpec, P: Iterable[int]) -> ObjectiveValue:
    indices = index_set(P, spec.m)
    if not indices:
        return ObjectiveValue(which=Objective.H, value=0.0)
    size = len(indices)
    result = ot_exact(spec.S.restrict(indices), np.ones(size), spec.capacity(size))
    return ObjectiveValue(which=Objective.H, value=result.objective, coupling=result.coupling)


def eval_g(spec: ProblemSpec, P: Iterable[int]) -> ObjectiveValue:
    indices = index_set(P, spec.m)
    if not indices:
        raise EmptySelectionError("g is undefined on the empty set")
    h = eval_h(spec, indices)
    return ObjectiveValue(which=Objective.G, value=h.value / len(indices), coupling=h.coupling)


def eval_f(spec: ProblemSpec, P: Iterable[int], cfg: Optional[SolverConfig] = None) -> ObjectiveValue:
    """f(P) by the partial OT solver selected in cfg (exact when cfg is None); f(empty) = 0."""
    cfg = cfg or SolverConfig.exact()
    indices = index_set(P, spec.m)
    if len(indices) > spec.k:
        raise BudgetError(f"|P|={len(indices)} exceeds the budget k={spec.k}")
    if not indices:
        return ObjectiveValue(which=Objective.F, value=0.0, coupling=Coupling.empty(spec.n))
    result = solve_pot(spec.S.restrict(indices), 1.0, spec.capacity(spec.k), cfg)
    return ObjectiveValue(which=Objective.F, value=result.objective, coupling=result.coupling)


def evaluate(spec: ProblemSpec, P: Iterable[int], which: Objective,
             cfg: Optional[SolverConfig] = None) -> ObjectiveValue:
    which = Objective(which)
    if which is Objective.L:
        return eval_l(spec, P)
    if which is Objective.H:
        return eval_h(spec, P)
    if which is Objective.G:
        return eval_g(spec, P)
    return eval_f(spec, P, cfg)


def exact_gain(spec: ProblemSpec, P: Iterable[int], j: int, cfg: Optional[SolverConfig] = None,
               base: Optional[float] = None) -> float:
    """
    f(P + {j}) - f(P), both with the same solver.

    Args:
        base: f(P) when the caller already has it.
    """
    indices = index_set(P, spec.m)
    if j in indices:
        raise InvalidInputError(f"candidate {j} is already in P")
    if len(indices) >= spec.k:
        raise BudgetError(f"|P|={len(indices)} leaves no room under k={spec.k}")
    if base is None:
        base = eval_f(spec, indices, cfg).value
    return eval_f(spec, indices + [int(j)], cfg).value - base
