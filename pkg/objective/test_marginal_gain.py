import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.containers import Coupling
from core.errors import BudgetError, CapacityError, InvalidInputError
from objective.marginal_gain import CapacityVector, SortedRows, alpha_bound, approx_gain, remaining_capacity
from transport.transport_solver import pot_exact


def test_remaining_capacity_without_prototypes():
    b = remaining_capacity(2, 4)
    np.testing.assert_allclose(b.b, [0.5] * 4)
    assert b.total == pytest.approx(2.0)


def test_remaining_capacity_subtracts_columns():
    b = remaining_capacity(2, 4, Coupling.of([[0.5, 0.5, 0.0, 0.0]]))
    np.testing.assert_allclose(b.b, [0.0, 0.0, 0.5, 0.5])
    assert b.clamped == 0.0


def test_remaining_capacity_clamps_overfull_columns():
    b = remaining_capacity(2, 4, Coupling.of([[0.5 + 1e-8, 0.5 - 1e-8, 0.0, 0.0]]))
    assert b.b[0] == 0.0
    assert b.clamped == pytest.approx(1e-8)


def test_remaining_capacity_checks_widths():
    with pytest.raises(InvalidInputError):
        remaining_capacity(2, 4, Coupling.of([[1.0, 0.0]]))
    with pytest.raises(InvalidInputError):
        CapacityVector.of([0.5, -0.1])


def test_approx_gain_fills_best_columns():
    value, v = approx_gain([4, 3, 2, 1], CapacityVector.of([0.5] * 4))
    assert value == pytest.approx(3.5)
    np.testing.assert_allclose(v, [0.5, 0.5, 0.0, 0.0])


def test_approx_gain_skips_blocked_columns():
    value, v = approx_gain([9, 1, 2, 3], CapacityVector.of([0, 0, 0.5, 0.5]))
    assert value == pytest.approx(2.5)
    np.testing.assert_allclose(v, [0.0, 0.0, 0.5, 0.5])


def test_approx_gain_ties_go_to_lower_column():
    _, v = approx_gain([2, 2, 2], CapacityVector.of([0.6, 0.6, 0.6]))
    np.testing.assert_allclose(v, [0.6, 0.4, 0.0])


def test_approx_gain_renormalises_rounding_shortfall():
    b = CapacityVector.of([0.5, 0.5 - 1e-7])
    value, v = approx_gain([2, 1], b)
    assert v.sum() == pytest.approx(1.0)
    assert value == pytest.approx(1.5, abs=1e-6)


def test_approx_gain_rejects_short_capacity():
    with pytest.raises(CapacityError):
        approx_gain([1, 1], CapacityVector.of([0.4, 0.4]))


@settings(deadline=None, max_examples=100)
@given(st.integers(1, 8), st.floats(1.0, 3.0), st.integers(0, 2**32 - 1))
def test_approx_gain_is_the_single_row_partial_ot(n, spare, seed):
    rng = np.random.default_rng(seed)
    row = rng.uniform(0, 2, size=n)
    b = rng.uniform(0.05, 1.0, size=n)
    b *= spare / b.sum()
    value, v = approx_gain(row, CapacityVector.of(b))
    assert value == pytest.approx(pot_exact(row[None, :], 1.0, b).objective, abs=1e-10)
    assert v.sum() == pytest.approx(1.0)
    assert np.all(v <= b + 1e-12)


@pytest.mark.slow
def test_approx_gain_matches_partial_ot_on_1000_pairs(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        row = rng.uniform(0, 2, size=n)
        b = rng.uniform(0.01, 1.0, size=n)
        b *= rng.uniform(1.0, 3.0) / b.sum()
        value, _ = approx_gain(row, CapacityVector.of(b))
        assert value == pytest.approx(pot_exact(row[None, :], 1.0, b).objective, abs=1e-10)


def test_sorted_rows_match_single_row_gains(rng):
    S = rng.uniform(0, 2, size=(7, 5))
    cache = SortedRows(S)
    b = CapacityVector.of(rng.uniform(0.1, 0.6, size=5) + 0.2)
    expected = [approx_gain(S[i], b)[0] for i in range(7)]
    np.testing.assert_allclose(cache.gains(b), expected, atol=1e-12)
    np.testing.assert_allclose(cache.gains(b, [4, 1]), [expected[4], expected[1]], atol=1e-12)
    np.testing.assert_allclose(cache.fill(3, b), approx_gain(S[3], b)[1], atol=1e-12)


def test_alpha_bound_example():
    bound = alpha_bound(np.array([[4.0, 3.0, 2.0, 1.0]]), 2)
    assert bound.block == 2
    assert bound.alpha_min[0] == pytest.approx(1.5)
    assert bound.alpha_max[0] == pytest.approx(3.5)
    assert bound.alpha == pytest.approx(3 / 7)


def test_alpha_bound_constant_and_zero_rows():
    assert alpha_bound(np.full((1, 4), 2.0), 2).alpha == pytest.approx(1.0)
    assert alpha_bound(np.zeros((2, 3)), 1).alpha == 1.0


def test_alpha_bound_range(rng):
    bound = alpha_bound(rng.uniform(0.1, 2, size=(6, 8)), 3)
    assert 0 < bound.alpha <= 1
    assert bound.block == 2


def test_alpha_bound_needs_budget_within_columns():
    with pytest.raises(BudgetError):
        alpha_bound(np.ones((2, 3)), 4)
