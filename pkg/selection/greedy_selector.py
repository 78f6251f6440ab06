import math
import time
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator

from core.containers import Coupling, ProblemSpec, SimilarityMatrix, SolverConfig
from core.errors import BudgetError, InvalidInputError
from core.logger import get_logger
from objective.marginal_gain import SortedRows, remaining_capacity
from objective.set_functions import eval_f

logger = get_logger("selection")

TIE_RTOL = 1e-12


class SelectionMethod(str, Enum):
    UNIPROT_EXACT = "uniprot_exact"
    UNIPROT_APPROX = "uniprot_approx"
    UNIPROT_STOCHASTIC = "uniprot_stochastic"
    KMEDOIDS = "kmedoids"
    RANDOM = "random"


class GainMode(str, Enum):
    EXACT = "exact"
    APPROX = "approx"


class GainStep(BaseModel):
    """One greedy step of an approximate-gain run, measured against the exact gain."""

    step: int
    index: int
    approx_gain: float
    exact_gain: float
    ratio: float
    solver_time: float
    gain_time: float


class Selection(BaseModel):
    method: SelectionMethod
    indices: List[int]
    step_values: List[float] = Field(default_factory=list)
    weights: List[float] = Field(default_factory=list)
    seed: Optional[int] = None
    timing: List[float] = Field(default_factory=list)
    solver_time: List[float] = Field(default_factory=list)
    gain_time: List[float] = Field(default_factory=list)
    final_value: Optional[float] = None
    trace: List[GainStep] = Field(default_factory=list)

    @field_validator("indices")
    @classmethod
    def _distinct(cls, indices: List[int]) -> List[int]:
        if len(set(indices)) != len(indices):
            raise InvalidInputError(f"selected indices must be distinct: {indices}")
        if any(i < 0 for i in indices):
            raise InvalidInputError("selected indices must be nonnegative")
        return indices

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Selection":
        return cls.model_validate_json(text)


class StochasticConfig(BaseModel):
    epsilon: float = Field(0.01, gt=0, lt=1)

    def pool_size(self, m: int, k: int, remaining: int) -> int:
        """ceil((m/k) ln(1/epsilon)), capped at the remaining candidates and at least 1."""
        size = math.ceil((m / k) * math.log(1.0 / self.epsilon))
        return max(1, min(size, remaining))


def _pick(gains: np.ndarray, pool: Sequence[int]) -> int:
    """Argmax over an ascending pool; near-ties resolve to the lowest index."""
    best = float(np.max(gains))
    threshold = best - TIE_RTOL * max(1.0, abs(best))
    return int(pool[int(np.flatnonzero(gains >= threshold)[0])])


def _draw_pool(rng: np.random.Generator, remaining: List[int], size: int) -> List[int]:
    if size >= len(remaining):
        return list(remaining)
    return sorted(int(i) for i in rng.choice(remaining, size=size, replace=False))


def select_uniprot(spec: ProblemSpec, cfg: Optional[SolverConfig] = None, gain_mode: GainMode = GainMode.APPROX,
                   stochastic: Optional[StochasticConfig] = None, seed: Optional[int] = None,
                   warm_start: bool = False, trace: bool = False) -> Selection:
    """
    Greedy maximisation of f under |P| <= k with uniform prototype weights.

    Args:
        spec: similarity, target marginal and budget.
        cfg: partial OT solver for f (exact when None).
        gain_mode: exact re-solves f for every candidate; approx uses the
            frozen-coupling closed form over cached sorted rows.
        stochastic: score a random pool per step instead of every candidate.
        seed: seed of the PCG64 generator drawing stochastic pools.
        warm_start: keep the coupling rows of accepted prototypes instead of
            re-solving; step_values then hold <S, gamma> of the frozen coupling.
        trace: also record the exact gain of every accepted prototype.

    Returns:
        Selection with k indices, weights 1/k and step_values[i] = f(P_{i+1}).
    """
    cfg = cfg or SolverConfig.exact()
    gain_mode = GainMode(gain_mode)
    if warm_start and gain_mode is not GainMode.APPROX:
        raise InvalidInputError("warm start needs the approximate gain")

    m, n, k = spec.m, spec.n, spec.k
    rng = np.random.default_rng(seed)
    cache = SortedRows(spec.S) if gain_mode is GainMode.APPROX else None
    full_cap = spec.capacity(k)
    exact_cfg = SolverConfig.exact()

    selected: List[int] = []
    remaining = list(range(m))
    current = eval_f(spec, [], cfg)
    frozen = np.zeros((0, n))
    exact_prev = 0.0
    result = Selection(method=_method(gain_mode, stochastic), indices=[], seed=seed)

    for step in range(k):
        started = time.perf_counter()
        if stochastic is None:
            pool = remaining
        else:
            pool = _draw_pool(rng, remaining, stochastic.pool_size(m, k, len(remaining)))

        solver_time = 0.0
        gain_started = time.perf_counter()
        if cache is not None:
            coupling = Coupling.of(frozen) if warm_start else current.coupling
            b = remaining_capacity(k, n, coupling, cap=full_cap)
            gains = cache.gains(b, pool)
            pick = _pick(gains, pool)
            gain_time = time.perf_counter() - gain_started

            solve_started = time.perf_counter()
            selected.append(pick)
            if warm_start:
                frozen = np.vstack([frozen, cache.fill(pick, b)])
                value = float(np.sum(spec.S.restrict(selected) * frozen))
            else:
                current = eval_f(spec, selected, cfg)
                value = current.value
            solver_time = time.perf_counter() - solve_started
            picked_gain = float(gains[pool.index(pick)])
        else:
            candidates = {j: eval_f(spec, selected + [j], cfg) for j in pool}
            gains = np.array([candidates[j].value - current.value for j in pool])
            pick = _pick(gains, pool)
            gain_time = time.perf_counter() - gain_started
            picked_gain = float(gains[pool.index(pick)])
            selected.append(pick)
            current = candidates[pick]
            value = current.value

        remaining.remove(pick)
        result.step_values.append(value)
        result.solver_time.append(solver_time)
        result.gain_time.append(gain_time)
        result.timing.append(time.perf_counter() - started)

        if trace:
            exact_now = eval_f(spec, selected, exact_cfg).value
            exact_gain = exact_now - exact_prev
            exact_prev = exact_now
            if exact_gain > 0:
                ratio = picked_gain / exact_gain
            else:
                ratio = 1.0 if picked_gain <= 1e-12 else math.inf
            result.trace.append(GainStep(step=step, index=pick, approx_gain=picked_gain, exact_gain=exact_gain,
                                         ratio=ratio, solver_time=solver_time, gain_time=gain_time))
        logger.debug("step %d picked %d gain=%.6g value=%.6g", step, pick, picked_gain, value)

    result.indices = selected
    result.weights = [1.0 / k] * k
    result.final_value = eval_f(spec, selected, cfg).value if warm_start else result.step_values[-1]
    logger.info("%s selected %d prototypes, f=%.6g", result.method.value, k, result.final_value)
    return result


def _method(gain_mode: GainMode, stochastic: Optional[StochasticConfig]) -> SelectionMethod:
    if stochastic is not None:
        return SelectionMethod.UNIPROT_STOCHASTIC
    if gain_mode is GainMode.EXACT:
        return SelectionMethod.UNIPROT_EXACT
    return SelectionMethod.UNIPROT_APPROX


def kmedoids_weights(spec: ProblemSpec, indices: Sequence[int]) -> List[float]:
    """Target mass served by each prototype when every column goes to its best prototype."""
    ascending = sorted(indices)
    owner = np.asarray(ascending)[np.argmax(spec.S.restrict(ascending), axis=0)]
    mass = {i: 0.0 for i in indices}
    for column, i in enumerate(owner):
        mass[int(i)] += spec.target.mass[column]
    return [mass[i] / spec.target.total for i in indices]


def select_kmedoids(spec: ProblemSpec) -> Selection:
    """Greedy facility location on l(P) with an incremental columnwise max."""
    S = spec.S.data
    nu = spec.target.mass
    best = np.zeros(spec.n)
    selected: List[int] = []
    result = Selection(method=SelectionMethod.KMEDOIDS, indices=[])
    candidates = np.arange(spec.m)

    for _ in range(spec.k):
        started = time.perf_counter()
        gains = (np.maximum(S, best[None, :]) - best[None, :]) @ nu
        gains[selected] = -np.inf
        pick = _pick(gains, candidates)
        selected.append(pick)
        best = np.maximum(best, S[pick])
        result.step_values.append(float(best @ nu))
        result.timing.append(time.perf_counter() - started)

    result.indices = selected
    result.weights = kmedoids_weights(spec, selected)
    result.final_value = result.step_values[-1]
    logger.info("kmedoids selected %d prototypes, l=%.6g", spec.k, result.final_value)
    return result


def select_random(spec: ProblemSpec, seed: Optional[int] = None) -> Selection:
    rng = np.random.default_rng(seed)
    indices = [int(i) for i in rng.choice(spec.m, size=spec.k, replace=False)]
    return Selection(method=SelectionMethod.RANDOM, indices=indices, weights=[1.0 / spec.k] * spec.k, seed=seed)


def select_per_source(spec: ProblemSpec, sources: Sequence[int], budgets: Mapping[int, int],
                      cfg: Optional[SolverConfig] = None, gain_mode: GainMode = GainMode.APPROX,
                      stochastic: Optional[StochasticConfig] = None, seed: Optional[int] = None) -> Selection:
    """
    Run select_uniprot on each source slice with its own budget and return the union.

    Args:
        sources: source id of every row of S.
        budgets: prototypes per source id; must sum to spec.k.
    """
    sources = np.asarray(sources)
    if sources.shape[0] != spec.m:
        raise InvalidInputError(f"{sources.shape[0]} source ids for {spec.m} rows")
    if sum(budgets.values()) != spec.k:
        raise BudgetError(f"per-source budgets sum to {sum(budgets.values())}, expected k={spec.k}")

    union: List[int] = []
    step_values: List[float] = []
    timing: List[float] = []
    for source in sorted(budgets):
        k_q = int(budgets[source])
        rows = np.flatnonzero(sources == source)
        if k_q > rows.size:
            raise BudgetError(f"source {source} has {rows.size} rows but a budget of {k_q}")
        if k_q == 0:
            continue
        sub = ProblemSpec(S=SimilarityMatrix(data=spec.S.data[rows], beta=spec.S.beta,
                                             source_metric=spec.S.source_metric),
                          target=spec.target, k=k_q)
        picked = select_uniprot(sub, cfg, gain_mode, stochastic, seed)
        union.extend(int(rows[i]) for i in picked.indices)
        step_values.extend(picked.step_values)
        timing.extend(picked.timing)

    final = eval_f(spec, union, cfg or SolverConfig.exact()).value
    return Selection(method=_method(GainMode(gain_mode), stochastic), indices=union, step_values=step_values,
                     weights=[1.0 / len(union)] * len(union), seed=seed, timing=timing, final_value=final)


def source_budgets(values: Sequence[int], source_ids: Sequence[int]) -> Dict[int, int]:
    """Pair a list of budgets with the sorted distinct source ids."""
    ids = sorted(set(int(s) for s in source_ids))
    if len(values) != len(ids):
        raise BudgetError(f"{len(values)} budgets given for {len(ids)} sources")
    return {source: int(k) for source, k in zip(ids, values)}
