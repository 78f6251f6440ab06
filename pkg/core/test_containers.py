import numpy as np
import pytest

from core.containers import Coupling, Marginal, Metric, ProblemSpec, SimilarityMatrix, SolverConfig, SolverMode
from core.errors import InvalidInputError, UniprotError


def test_metric_codes_round_trip():
    for metric in Metric:
        assert Metric.from_code(metric.code) is metric
    with pytest.raises(InvalidInputError):
        Metric.from_code(len(Metric))


def test_error_codes_are_stable():
    err = InvalidInputError("bad k")
    assert err.code == "E_INPUT"
    assert str(err) == "[E_INPUT] bad k"
    assert isinstance(err, UniprotError) and isinstance(err, ValueError)


def test_similarity_matrix_is_read_only():
    S = SimilarityMatrix(data=[[1, 2], [3, 4]])
    assert S.data.dtype == np.float64
    assert (S.rows, S.cols) == (2, 2)
    with pytest.raises(ValueError):
        S.data[0, 0] = 9.0


@pytest.mark.parametrize("data", [[[1.0, -0.5]], [[np.nan, 1.0]], [1.0, 2.0], np.zeros((0, 3))])
def test_similarity_matrix_rejects_bad_data(data):
    with pytest.raises(ValueError):
        SimilarityMatrix(data=data)


def test_restrict_keeps_order_and_checks_range():
    S = SimilarityMatrix(data=[[1, 1], [2, 2], [3, 3]])
    np.testing.assert_array_equal(S.restrict([2, 0]), [[3, 3], [1, 1]])
    with pytest.raises(InvalidInputError):
        S.restrict([3])


def test_marginal_tracks_total():
    nu = Marginal.of([0.25, 0.25, 0.25, 0.25])
    assert nu.total == pytest.approx(1.0)
    assert nu.size == 4
    with pytest.raises(ValueError):
        Marginal(mass=[1.0, 1.0], total=3.0)
    with pytest.raises(ValueError):
        Marginal.of([0.5, -0.1])


def test_coupling_sums():
    gamma = Coupling.of([[0.5, 0.0], [0.25, 0.25]])
    np.testing.assert_allclose(gamma.row_sums, [0.5, 0.5])
    np.testing.assert_allclose(gamma.col_sums, [0.75, 0.25])
    assert Coupling.empty(3).shape == (0, 3)


@pytest.mark.parametrize("size, expected", [(1, 100), (200, 100), (201, 1000), (1000, 1000),
                                            (1001, 2000), (4000, 2000), (4001, 4000)])
def test_default_iterations_follow_size_table(size, expected):
    assert SolverConfig.entropic().iterations_for(size) == expected


def test_solver_config_accepts_lambda_alias():
    cfg = SolverConfig(**{"lambda": 0.1, "max_iter": 7})
    assert cfg.lambda_ == 0.1
    assert cfg.iterations_for(10_000) == 7
    assert SolverConfig.exact().mode is SolverMode.EXACT
    with pytest.raises(ValueError):
        SolverConfig.entropic(lambda_=0.0)


def test_problem_spec_checks_budget_and_shapes():
    S = np.ones((3, 4))
    spec = ProblemSpec.uniform(S, 2)
    np.testing.assert_allclose(spec.capacity(spec.k), [0.5] * 4)
    with pytest.raises(ValueError):
        ProblemSpec.uniform(S, 4)
    with pytest.raises(ValueError):
        ProblemSpec.uniform(S, 0)
    with pytest.raises(ValueError):
        ProblemSpec(S=SimilarityMatrix(data=S), target=Marginal.of([0.5, 0.5]), k=1)
