import numpy as np
import pytest

from core.containers import ProblemSpec, SolverConfig
from core.similarity import build_similarity
from data.longtail_generator import SkewSpec, gen_gaussian_longtail
from selection.bench import gain_trace_table, scaling_table


def test_gain_trace_table(rng):
    spec = ProblemSpec.uniform(rng.uniform(1, 2, size=(12, 12)), 4)
    table = gain_trace_table(spec, SolverConfig.exact())
    assert list(table["step"]) == [0, 1, 2, 3]
    assert (table["ratio"] <= 1 + 1e-9).all() and (table["ratio"] > 0).all()
    assert np.all(np.diff(table["f_exact"]) >= -1e-9)


def test_scaling_table_shape():
    table = scaling_table([50, 100], n=20, k=5, repeats=2)
    assert list(table["m"]) == [50, 100]
    assert table["relative_to_first"].iloc[0] == 1.0
    assert (table["seconds"] > 0).all()


@pytest.mark.slow
def test_gain_ratio_on_gaussian_mixture():
    points, _ = gen_gaussian_longtail(5, 2, 100, 5, SkewSpec(num_classes=5), seed=0)
    spec = ProblemSpec.uniform(build_similarity(points.features, points.features), 50)
    table = gain_trace_table(spec, SolverConfig.exact())
    assert table["ratio"].mean() >= 0.90
    assert table["ratio"].max() <= 1 + 1e-9
    f_exact, f_approx = table["f_exact"].iloc[-1], table["f_approx"].iloc[-1]
    assert abs(f_exact - f_approx) <= 0.05 * f_exact


@pytest.mark.slow
def test_gain_scoring_scales_linearly_in_sources():
    table = scaling_table([1000, 2000], n=200, k=50, repeats=10)
    assert table["relative_to_first"].iloc[-1] <= 4.0
