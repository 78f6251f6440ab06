"""
Balanced OT and semi-relaxed partial OT, both as maximisation of <S, gamma>.

Exact solvers go through the network simplex of POT (`ot.emd`) on the cost
max(S) - S. Partial OT is reduced to balanced OT by appending a zero-similarity
dummy source row that absorbs the unused target capacity. Balanced entropic OT
is POT's log-domain Sinkhorn; the partial variant runs its own log-domain
scaling on exp(S / lambda) because its column step only ever scales down.
"""
from typing import Optional, Union

import numpy as np
import ot
from pydantic import BaseModel, ConfigDict
from scipy.special import logsumexp

from core.containers import Coupling, Marginal, SimilarityMatrix, SolverConfig, SolverMode
from core.errors import CapacityError, EmptySelectionError, InvalidInputError, MassMismatchError, SolverError
from core.logger import get_logger
from core.settings import get_settings

logger = get_logger("transport")

MASS_TOL = 1e-9

Scores = Union[np.ndarray, SimilarityMatrix]


class TransportResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coupling: Coupling
    objective: float
    iterations_used: int
    converged: bool
    marginal_violation: float
    stabilization_shift: Optional[np.ndarray] = None


def _scores(S: Scores) -> np.ndarray:
    arr = S.data if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise InvalidInputError(f"expected a 2-D score block, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptySelectionError("active row set is empty")
    return arr


def _as_marginal(value, name: str, size: int) -> Marginal:
    marginal = value if isinstance(value, Marginal) else Marginal(mass=value)
    if marginal.size != size:
        raise InvalidInputError(f"{name} has {marginal.size} entries, expected {size}")
    return marginal


def _emd(S: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cost = np.ascontiguousarray(S.max() - S)
    plan, log = ot.emd(np.ascontiguousarray(a), np.ascontiguousarray(b), cost,
                       numItermax=get_settings().emd_max_iter, log=True)
    if log.get("warning") is not None:
        raise SolverError(f"network simplex did not finish: {log['warning']}")
    return np.maximum(np.asarray(plan, dtype=np.float64), 0.0)


def _result(S: np.ndarray, plan: np.ndarray, iterations: int, converged: bool, violation: float,
            shift: Optional[np.ndarray] = None) -> TransportResult:
    return TransportResult(
        coupling=Coupling.of(plan),
        objective=float(np.sum(S * plan)),
        iterations_used=iterations,
        converged=converged,
        marginal_violation=float(violation),
        stabilization_shift=shift,
    )


def _balanced_violation(plan: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    return max(np.max(np.abs(plan.sum(axis=1) - mu)), np.max(np.abs(plan.sum(axis=0) - nu)))


def _partial_violation(plan: np.ndarray, row_mass: float, cap: np.ndarray) -> float:
    rows = np.max(np.abs(plan.sum(axis=1) - row_mass))
    cols = np.max(np.maximum(plan.sum(axis=0) - cap, 0.0))
    return max(rows, cols)


def ot_exact(S: Scores, mu, nu) -> TransportResult:
    """
    Maximise <S, gamma> over couplings with gamma 1 = mu and gamma^T 1 = nu.

    Any optimal vertex may be returned; the objective value is the contract.
    """
    scores = _scores(S)
    mu = _as_marginal(mu, "mu", scores.shape[0])
    nu = _as_marginal(nu, "nu", scores.shape[1])
    if abs(mu.total - nu.total) > MASS_TOL * max(1.0, nu.total):
        raise MassMismatchError(f"source mass {mu.total} differs from target mass {nu.total}")

    plan = _emd(scores, mu.mass, nu.mass)
    violation = _balanced_violation(plan, mu.mass, nu.mass)
    logger.debug("ot_exact %dx%d objective=%.6g violation=%.2e",
                 scores.shape[0], scores.shape[1], float(np.sum(scores * plan)), violation)
    return _result(scores, plan, 1, True, violation)


def pot_exact(S: Scores, row_mass: float, nu_cap) -> TransportResult:
    """
    Semi-relaxed partial OT: every active row ships exactly row_mass, column j
    receives at most nu_cap[j].
    """
    scores = _scores(S)
    p, n = scores.shape
    cap = _as_marginal(nu_cap, "nu_cap", n)
    source_mass = p * row_mass
    slack = cap.total - source_mass
    if slack < -MASS_TOL * max(1.0, cap.total):
        raise CapacityError(f"source mass {source_mass} exceeds target capacity {cap.total}")

    mu = np.full(p, float(row_mass))
    if slack <= MASS_TOL * max(1.0, cap.total):
        plan = _emd(scores, mu, cap.mass * (source_mass / cap.total))
    else:
        extended = np.vstack([scores, np.zeros((1, n))])
        plan = _emd(extended, np.append(mu, slack), cap.mass)[:p]

    violation = _partial_violation(plan, row_mass, cap.mass)
    return _result(scores, plan, 1, True, violation)


def _log_kernel(scores: np.ndarray, lam: float):
    shift = scores.max(axis=1)
    log_k = (scores - shift[:, None]) / lam
    return log_k, shift


def ot_entropic(S: Scores, mu, nu, cfg: SolverConfig) -> TransportResult:
    """
    Balanced entropic OT through POT's log-domain Sinkhorn on the cost max(S) - S.

    Rows and columns with zero mass are left out of the scaling and get zero
    plan entries. Convergence is judged on the max-abs marginal error of the
    returned plan, not on POT's own stopping rule.
    """
    scores = _scores(S)
    mu = _as_marginal(mu, "mu", scores.shape[0])
    nu = _as_marginal(nu, "nu", scores.shape[1])
    if abs(mu.total - nu.total) > MASS_TOL * max(1.0, nu.total):
        raise MassMismatchError(f"source mass {mu.total} differs from target mass {nu.total}")

    rows = np.flatnonzero(mu.mass > 0)
    cols = np.flatnonzero(nu.mass > 0)
    top = float(scores.max())
    cost = np.ascontiguousarray(top - scores[np.ix_(rows, cols)])
    max_iter = cfg.iterations_for(scores.shape[0])
    block, log = ot.sinkhorn(mu.mass[rows], nu.mass[cols], cost, cfg.lambda_, method="sinkhorn_log",
                             numItermax=max_iter, stopThr=cfg.tol, log=True, warn=False)

    plan = np.zeros_like(scores)
    plan[np.ix_(rows, cols)] = np.asarray(block, dtype=np.float64)
    if not np.all(np.isfinite(plan)):
        raise SolverError(f"entropic OT produced non-finite entries at lambda={cfg.lambda_}")
    iterations = min(int(log.get("niter", max_iter - 1)) + 1, max_iter)
    violation = _balanced_violation(plan, mu.mass, nu.mass)
    converged = bool(violation < cfg.tol)
    if not converged:
        logger.warning("ot_entropic stopped after %d iterations, violation %.2e", iterations, violation)
    return _result(scores, plan, iterations, converged, violation, np.full(scores.shape[0], top))


def pot_entropic(S: Scores, row_mass: float, nu_cap, cfg: SolverConfig) -> TransportResult:
    """
    Entropic semi-relaxed partial OT by alternating KL projections.

    The row step rescales rows to row_mass; the column step scales each column
    of the row-projected kernel by min(1, cap / column sum), so columns are
    only ever scaled down. The reported objective excludes the entropy term.
    """
    scores = _scores(S)
    p, n = scores.shape
    cap = _as_marginal(nu_cap, "nu_cap", n)
    if p * row_mass > cap.total + MASS_TOL * max(1.0, cap.total):
        raise CapacityError(f"source mass {p * row_mass} exceeds target capacity {cap.total}")

    log_k, shift = _log_kernel(scores, cfg.lambda_)
    max_iter = cfg.iterations_for(p)
    log_row = np.log(row_mass)
    with np.errstate(divide="ignore"):
        log_cap = np.log(cap.mass)

    b = np.zeros(n)
    violation = np.inf
    iterations = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        while iterations < max_iter:
            iterations += 1
            a = log_row - logsumexp(log_k + b[None, :], axis=1)
            col_log_mass = logsumexp(log_k + a[:, None], axis=0)
            b = np.minimum(0.0, log_cap - col_log_mass)
            plan = np.exp(log_k + a[:, None] + b[None, :])
            violation = _partial_violation(plan, row_mass, cap.mass)
            if violation < cfg.tol:
                break

    converged = bool(violation < cfg.tol)
    if not converged:
        logger.warning("pot_entropic stopped after %d iterations, violation %.2e", iterations, violation)
    else:
        logger.debug("pot_entropic converged in %d iterations", iterations)
    return _result(scores, plan, iterations, converged, violation, shift)


def solve_pot(S: Scores, row_mass: float, nu_cap, cfg: SolverConfig) -> TransportResult:
    """Dispatch on cfg.mode; exact mode ignores lambda."""
    if cfg.mode is SolverMode.EXACT:
        return pot_exact(S, row_mass, nu_cap)
    return pot_entropic(S, row_mass, nu_cap, cfg)


def solve_ot(S: Scores, mu, nu, cfg: SolverConfig) -> TransportResult:
    if cfg.mode is SolverMode.EXACT:
        return ot_exact(S, mu, nu)
    return ot_entropic(S, mu, nu, cfg)
