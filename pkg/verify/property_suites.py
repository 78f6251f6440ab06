"""
Executable property suites for the objective family.

Each suite draws random instances, checks one group of inequalities with the
exact solvers, and records the worst violation. A failed property is recorded
in the report, never raised.
"""
import itertools
import math
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from mpire import WorkerPool
from pydantic import BaseModel, Field, model_validator
from tqdm import tqdm

from core.containers import ProblemSpec, SolverConfig
from core.errors import GuardExceededError, InvalidInputError
from core.logger import get_logger
from objective.marginal_gain import alpha_bound, approx_gain, remaining_capacity
from objective.set_functions import Objective, eval_f, eval_h, evaluate
from selection.greedy_selector import GainMode, select_uniprot
from transport.transport_solver import ot_exact, pot_exact
from verify.instances import InstanceParams, random_instance, serialize_instance

logger = get_logger("verify")

BRUTE_FORCE_LIMIT = 1_000_000
TOL = 1e-8
TIGHT_TOL = 1e-9
EXACT = SolverConfig.exact()


class Suite(str, Enum):
    SUPERADDITIVITY = "lemma1"
    SUBMODULARITY = "lemma2"
    TIGHTNESS = "lemma3"
    GREEDY_GUARANTEE = "lemma4"
    APPROX_GUARANTEE = "lemma5"
    GAIN_RATIO = "gain_ratio"
    POT_OT_EQUALITY = "pot_ot_equality"


class VerificationReport(BaseModel):
    suite: Suite
    trials: int
    failures: int = 0
    worst_violation: float = 0.0
    counterexample: Optional[dict] = None
    statistics: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self):
        if self.failures == 0 and self.counterexample is not None:
            raise InvalidInputError("a report without failures cannot carry a counterexample")
        return self


class TrialOutcome(BaseModel):
    violation: float = 0.0
    failed: bool = False
    detail: str = ""
    samples: List[float] = Field(default_factory=list)
    instance: Optional[dict] = None


class _Tracker:
    """Accumulates the worst violation of one trial."""

    def __init__(self):
        self.violation = 0.0
        self.failed = False
        self.detail = ""

    def check(self, violation: float, tol: float, what: str) -> None:
        if violation > self.violation:
            self.violation = violation
        if violation > tol and not self.failed:
            self.failed = True
            self.detail = f"{what}: violation {violation:.3e}"

    def flag(self, what: str) -> None:
        if not self.failed:
            self.failed = True
            self.detail = what

    def outcome(self, spec: ProblemSpec, samples: Optional[List[float]] = None) -> TrialOutcome:
        return TrialOutcome(violation=max(self.violation, 0.0), failed=self.failed, detail=self.detail,
                            samples=samples or [], instance=serialize_instance(spec) if self.failed else None)


def brute_force_opt(spec: ProblemSpec, objective: Objective = Objective.F) -> Tuple[List[int], float]:
    """
    Best size-k set by exhaustive enumeration with exact solvers.

    Sets are visited in lexicographic order and only a strictly better value
    (beyond 1e-9 relative) replaces the incumbent, so ties keep the smallest set.
    """
    count = math.comb(spec.m, spec.k)
    if count > BRUTE_FORCE_LIMIT:
        raise GuardExceededError(f"C({spec.m}, {spec.k}) = {count} subsets exceeds {BRUTE_FORCE_LIMIT}")
    best_set: List[int] = []
    best_value = -math.inf
    for subset in itertools.combinations(range(spec.m), spec.k):
        value = evaluate(spec, subset, objective, EXACT).value
        if not best_set or value > best_value + TIGHT_TOL * max(1.0, abs(best_value)):
            best_set, best_value = list(subset), value
    return best_set, best_value


def _random_subset(rng: np.random.Generator, pool: List[int], size: int) -> List[int]:
    return sorted(int(i) for i in rng.choice(pool, size=size, replace=False)) if size else []


def _check_superadditivity(spec: ProblemSpec, rng: np.random.Generator) -> TrialOutcome:
    tracker = _Tracker()
    chain = [int(i) for i in rng.permutation(spec.m)]
    previous = 0.0
    for size in range(1, spec.m + 1):
        value = eval_h(spec, chain[:size]).value
        tracker.check(-value, TOL, "h non-negativity")
        tracker.check(previous - value, TOL, f"h monotonicity at |P|={size}")
        previous = value

    for _ in range(3):
        if spec.m < 2:
            break
        total = int(rng.integers(2, spec.m + 1))
        split = int(rng.integers(1, total))
        both = _random_subset(rng, list(range(spec.m)), total)
        order = [int(i) for i in rng.permutation(both)]
        first, second = sorted(order[:split]), sorted(order[split:])
        union = eval_h(spec, first + second).value
        parts = eval_h(spec, first).value + eval_h(spec, second).value
        tracker.check(parts - union, TOL, "h super-additivity")
    return tracker.outcome(spec)


def _check_submodularity(spec: ProblemSpec, rng: np.random.Generator) -> TrialOutcome:
    tracker = _Tracker()
    ground = list(range(spec.m))
    for _ in range(3):
        size_b = int(rng.integers(0, min(spec.k - 1, spec.m - 1) + 1))
        B = _random_subset(rng, ground, size_b)
        A = _random_subset(rng, B, int(rng.integers(0, size_b + 1)))
        u = int(rng.choice([i for i in ground if i not in B]))
        f_a, f_b = eval_f(spec, A, EXACT).value, eval_f(spec, B, EXACT).value
        gain_a = eval_f(spec, A + [u], EXACT).value - f_a
        gain_b = eval_f(spec, B + [u], EXACT).value - f_b
        tracker.check(-f_a, TOL, "f non-negativity")
        tracker.check(f_a - f_b, TOL, "f monotonicity")
        tracker.check(gain_b - gain_a, TOL, "f submodularity")
    return tracker.outcome(spec)


def _check_tightness(spec: ProblemSpec, rng: np.random.Generator) -> TrialOutcome:
    tracker = _Tracker()
    f_set, f_best = brute_force_opt(spec, Objective.F)
    h_set, h_best = brute_force_opt(spec, Objective.H)
    tracker.check(abs(f_best - h_best), TOL, "optimal values of f and h")
    if f_set != h_set:
        tracker.flag(f"argmax sets differ: f {f_set}, h {h_set}")

    ground = list(range(spec.m))
    full = _random_subset(rng, ground, spec.k)
    tracker.check(abs(eval_f(spec, full, EXACT).value - eval_h(spec, full).value), TOL, "f = h at |P| = k")
    if spec.k > 1:
        smaller = _random_subset(rng, ground, int(rng.integers(1, spec.k)))
        tracker.check(eval_h(spec, smaller).value - eval_f(spec, smaller, EXACT).value, TIGHT_TOL,
                      "f >= h below k")
    return tracker.outcome(spec)


def _check_greedy_guarantee(spec: ProblemSpec, rng: np.random.Generator) -> TrialOutcome:
    tracker = _Tracker()
    _, opt = brute_force_opt(spec, Objective.F)
    greedy = select_uniprot(spec, EXACT, GainMode.EXACT)
    tracker.check((1.0 - 1.0 / math.e) * opt - greedy.final_value, TOL, "(1 - 1/e) guarantee")
    return tracker.outcome(spec)


def gain_sandwich(spec: ProblemSpec, indices: List[int]) -> List[Tuple[float, float, float]]:
    """
    (approx, exact, ratio_j) for every candidate j at every prefix of `indices`,
    with ratio_j = alpha_min[j] / alpha_max[j].
    """
    bound = alpha_bound(spec.S, spec.k)
    rows = []
    for step in range(len(indices)):
        prefix = indices[:step]
        base = eval_f(spec, prefix, EXACT)
        b = remaining_capacity(spec.k, spec.n, base.coupling, cap=spec.capacity(spec.k))
        for j in range(spec.m):
            if j in prefix:
                continue
            approx, _ = approx_gain(spec.S.data[j], b)
            exact = eval_f(spec, prefix + [j], EXACT).value - base.value
            rows.append((approx, exact, bound.ratio(j)))
    return rows


def _check_approx_guarantee(spec: ProblemSpec, rng: np.random.Generator) -> TrialOutcome:
    tracker = _Tracker()
    _, opt = brute_force_opt(spec, Objective.F)
    greedy = select_uniprot(spec, EXACT, GainMode.APPROX)
    alpha = alpha_bound(spec.S, spec.k).alpha
    tracker.check((1.0 - math.exp(-alpha)) * opt - greedy.final_value, TOL, "(1 - e^-alpha) guarantee")
    for approx, exact, ratio in gain_sandwich(spec, greedy.indices):
        tracker.check(approx - exact, TIGHT_TOL, "approximate gain above exact gain")
        tracker.check(ratio * exact - approx, TOL, "approximate gain below alpha bound")
        tracker.check(-approx, TIGHT_TOL, "negative approximate gain")
    return tracker.outcome(spec)


def _check_gain_ratio(spec: ProblemSpec, rng: np.random.Generator) -> TrialOutcome:
    tracker = _Tracker()
    greedy = select_uniprot(spec, EXACT, GainMode.APPROX, trace=True)
    ratios = [step.ratio for step in greedy.trace]
    for ratio in ratios:
        tracker.check(ratio - 1.0, TIGHT_TOL, "gain ratio above 1")
    return tracker.outcome(spec, samples=ratios)


def _check_pot_ot_equality(spec: ProblemSpec, rng: np.random.Generator) -> TrialOutcome:
    tracker = _Tracker()
    ground = list(range(spec.m))
    full = _random_subset(rng, ground, spec.k)
    block = spec.S.restrict(full)
    cap = spec.capacity(spec.k)
    pot = pot_exact(block, 1.0, cap).objective
    ot = ot_exact(block, np.ones(spec.k), cap).objective
    tracker.check(abs(pot - ot), TOL, "POT = OT under equal mass")

    if spec.k > 1:
        smaller = _random_subset(rng, ground, int(rng.integers(1, spec.k)))
        block = spec.S.restrict(smaller)
        relaxed = pot_exact(block, 1.0, cap).objective
        balanced = ot_exact(block, np.ones(len(smaller)), spec.capacity(len(smaller))).objective
        tracker.check(balanced - relaxed, TOL, "POT dominates OT with larger capacity")
    return tracker.outcome(spec)


CHECKS: Dict[Suite, Callable[[ProblemSpec, np.random.Generator], TrialOutcome]] = {
    Suite.SUPERADDITIVITY: _check_superadditivity,
    Suite.SUBMODULARITY: _check_submodularity,
    Suite.TIGHTNESS: _check_tightness,
    Suite.GREEDY_GUARANTEE: _check_greedy_guarantee,
    Suite.APPROX_GUARANTEE: _check_approx_guarantee,
    Suite.GAIN_RATIO: _check_gain_ratio,
    Suite.POT_OT_EQUALITY: _check_pot_ot_equality,
}


def run_trial(suite: str, params: dict, seed: int, trial: int) -> TrialOutcome:
    rng = np.random.default_rng([seed, trial])
    spec = random_instance(rng, InstanceParams(**params))
    return CHECKS[Suite(suite)](spec, rng)


def run_suite(suite: Suite, trials: int, params: Optional[InstanceParams] = None, seed: int = 0,
              threads: int = 1, progress: bool = False) -> VerificationReport:
    """
    Run `trials` independent random trials of one suite.

    Trial t draws its instance from PCG64 seeded with (seed, t), so reports do
    not depend on the number of worker threads.
    """
    suite = Suite(suite)
    params = params or InstanceParams()
    args = [(suite.value, params.model_dump(), seed, t) for t in range(trials)]
    if threads > 1 and trials > 1:
        with WorkerPool(n_jobs=threads) as pool:
            outcomes = pool.map(run_trial, args, progress_bar=progress)
    else:
        outcomes = [run_trial(*a) for a in tqdm(args, desc=suite.value, disable=not progress)]

    failures = [o for o in outcomes if o.failed]
    samples = [s for o in outcomes for s in o.samples]
    statistics = {}
    if samples:
        statistics = {"mean_ratio": float(np.mean(samples)), "min_ratio": float(np.min(samples)),
                      "max_ratio": float(np.max(samples)), "steps": float(len(samples))}

    report = VerificationReport(
        suite=suite,
        trials=trials,
        failures=len(failures),
        worst_violation=max((o.violation for o in outcomes), default=0.0),
        counterexample={**failures[0].instance, "detail": failures[0].detail} if failures else None,
        statistics=statistics,
    )
    log = logger.warning if failures else logger.info
    log("%s: %d/%d trials failed, worst violation %.3e", suite.value, len(failures), trials,
        report.worst_violation)
    return report
