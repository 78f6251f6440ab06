import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import lp_partial
from core.containers import SolverConfig
from core.errors import CapacityError, EmptySelectionError, MassMismatchError
from transport.transport_solver import ot_entropic, ot_exact, pot_entropic, pot_exact, solve_ot, solve_pot


def test_ot_exact_forced_plan():
    result = ot_exact([[1.0]], [1.0], [1.0])
    np.testing.assert_allclose(result.coupling.plan, [[1.0]])
    assert result.objective == pytest.approx(1.0)


def test_ot_exact_diagonal():
    result = ot_exact([[2.0, 0.0], [0.0, 2.0]], [0.5, 0.5], [0.5, 0.5])
    np.testing.assert_allclose(result.coupling.plan, np.diag([0.5, 0.5]), atol=1e-12)
    assert result.objective == pytest.approx(2.0)
    assert result.converged and result.marginal_violation < 1e-12


def test_ot_exact_matches_lp(rng, lp):
    for _ in range(10):
        S = rng.uniform(0, 5, size=(4, 3))
        mu, nu = np.full(4, 0.25), np.full(3, 1 / 3)
        assert ot_exact(S, mu, nu).objective == pytest.approx(lp["balanced"](S, mu, nu), abs=1e-9)


def test_ot_exact_rejects_mass_mismatch():
    with pytest.raises(MassMismatchError):
        ot_exact([[1.0, 1.0]], [1.0], [0.25, 0.25])


def test_pot_exact_single_row_takes_best_column():
    result = pot_exact([[3.0, 1.0]], 1.0, [1.0, 1.0])
    np.testing.assert_allclose(result.coupling.plan, [[1.0, 0.0]], atol=1e-12)
    assert result.objective == pytest.approx(3.0)


def test_pot_exact_caps_force_matching():
    result = pot_exact([[3.0, 1.0], [1.0, 3.0]], 1.0, [1.0, 1.0])
    np.testing.assert_allclose(result.coupling.plan, np.eye(2), atol=1e-12)
    assert result.objective == pytest.approx(6.0)


def test_pot_exact_matches_lp_with_slack(rng, lp):
    for _ in range(10):
        S = rng.uniform(0, 5, size=(3, 5))
        cap = np.full(5, 3 / 5)
        result = pot_exact(S[:2], 1.0, cap)
        assert result.objective == pytest.approx(lp["partial"](S[:2], 1.0, cap), abs=1e-9)
        assert np.all(result.coupling.col_sums <= cap + 1e-12)
        np.testing.assert_allclose(result.coupling.row_sums, 1.0, atol=1e-12)


def test_pot_exact_without_slack_equals_ot(rng):
    S = rng.uniform(0, 5, size=(3, 5))
    cap = np.full(5, 3 / 5)
    assert pot_exact(S, 1.0, cap).objective == pytest.approx(ot_exact(S, np.ones(3), cap).objective)


@settings(deadline=None, max_examples=40)
@given(st.integers(1, 4), st.integers(1, 6), st.floats(1.0, 3.0), st.integers(0, 2**32 - 1))
def test_pot_exact_agrees_with_lp(p, n, spare, seed):
    rng = np.random.default_rng(seed)
    S = rng.uniform(0, 2, size=(p, n))
    cap = rng.uniform(0.1, 1.0, size=n)
    cap *= p * spare / cap.sum()
    assert pot_exact(S, 1.0, cap).objective == pytest.approx(lp_partial(S, 1.0, cap), abs=1e-9)


def test_pot_exact_rejects_overfull_rows():
    with pytest.raises(CapacityError):
        pot_exact(np.ones((3, 2)), 1.0, [0.5, 0.5])


def test_empty_active_set():
    with pytest.raises(EmptySelectionError):
        pot_exact(np.zeros((0, 3)), 1.0, [1.0, 1.0, 1.0])


def test_pot_entropic_small_lambda_is_near_exact():
    result = pot_entropic([[3.0, 1.0]], 1.0, [1.0, 1.0], SolverConfig.entropic(0.01))
    assert result.objective == pytest.approx(3.0, abs=0.05)
    assert result.coupling.plan[0, 0] >= 0.95
    np.testing.assert_allclose(result.stabilization_shift, [3.0])


def test_pot_entropic_large_lambda_spreads_mass():
    result = pot_entropic([[3.0, 1.0], [1.0, 3.0]], 1.0, [1.0, 1.0], SolverConfig.entropic(100.0, max_iter=500))
    np.testing.assert_allclose(result.coupling.plan, 0.5, atol=0.02)
    assert result.objective < 6.0


def test_pot_entropic_never_overfills_columns(rng):
    S = rng.uniform(0, 1, size=(4, 7))
    cap = np.full(7, 6 / 7)
    result = pot_entropic(S, 1.0, cap, SolverConfig.entropic(0.5, max_iter=5000, tol=1e-9))
    assert result.converged
    assert np.all(result.coupling.col_sums <= cap + 1e-12)
    np.testing.assert_allclose(result.coupling.row_sums, 1.0, atol=1e-8)


@pytest.mark.slow
def test_entropic_gap_shrinks_with_lambda(rng):
    # 20000 iterations at tol 1e-9; the default table gives 100 at this size,
    # too few for lambda = 0.001 to converge
    monotone = 0
    for _ in range(50):
        S = rng.uniform(0, 1, size=(20, 40))
        S = (S - S.min()) / (S.max() - S.min())
        cap = np.full(40, 0.75)
        exact = pot_exact(S, 1.0, cap).objective
        gaps = [exact - pot_entropic(S, 1.0, cap, SolverConfig.entropic(lam, max_iter=20000, tol=1e-9)).objective
                for lam in (0.1, 0.01, 0.001)]
        assert gaps[1] <= 0.05 * exact
        monotone += gaps[1] <= gaps[0] + 1e-9 and gaps[2] <= gaps[1] + 1e-9
    assert monotone >= 45


def test_ot_entropic_single_cell():
    for lam in (0.001, 1.0, 100.0):
        result = ot_entropic([[4.0]], [1.0], [1.0], SolverConfig.entropic(lam))
        np.testing.assert_allclose(result.coupling.plan, [[1.0]])


def test_ot_entropic_diagonal_small_lambda():
    cfg = SolverConfig.entropic(0.001)
    result = ot_entropic([[2.0, 0.0], [0.0, 2.0]], [0.5, 0.5], [0.5, 0.5], cfg)
    assert result.objective == pytest.approx(2.0, abs=1e-2)


def test_ot_entropic_constant_scores():
    for lam in (0.01, 1.0):
        result = ot_entropic(np.full((3, 4), 2.5), np.full(3, 1 / 3), np.full(4, 0.25), SolverConfig.entropic(lam))
        assert result.objective == pytest.approx(2.5, abs=1e-6)


def test_dispatch_ignores_lambda_in_exact_mode():
    S = [[3.0, 1.0], [1.0, 3.0]]
    exact = SolverConfig(**{"lambda": 5.0, "mode": "exact"})
    assert solve_pot(S, 1.0, [1.0, 1.0], exact).objective == pytest.approx(6.0)
    assert solve_ot(S, [1.0, 1.0], [1.0, 1.0], exact).objective == pytest.approx(6.0)


def test_ot_entropic_skips_zero_mass_rows():
    S = [[1.0, 0.0], [5.0, 5.0], [0.0, 1.0]]
    result = ot_entropic(S, [0.5, 0.0, 0.5], [0.5, 0.5], SolverConfig.entropic(0.01))
    np.testing.assert_array_equal(result.coupling.plan[1], [0.0, 0.0])
    np.testing.assert_allclose(result.coupling.row_sums, [0.5, 0.0, 0.5], atol=1e-6)
    assert result.objective == pytest.approx(1.0, abs=1e-3)


def test_ot_entropic_approaches_exact(rng):
    S = rng.uniform(0, 1, size=(5, 5))
    mass = np.full(5, 0.2)
    exact = ot_exact(S, mass, mass).objective
    result = ot_entropic(S, mass, mass, SolverConfig.entropic(0.01, max_iter=20000, tol=1e-9))
    assert result.objective <= exact + 1e-9
    assert result.objective == pytest.approx(exact, abs=0.04)
    np.testing.assert_allclose(result.coupling.row_sums, mass, atol=1e-8)
