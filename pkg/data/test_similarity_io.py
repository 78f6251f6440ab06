import numpy as np
import pytest

from core.containers import Metric, SimilarityMatrix
from core.errors import DataFileError, FormatError, InvalidInputError
from data.similarity_io import load_similarity, save_similarity


def test_round_trip(tmp_path, rng):
    S = SimilarityMatrix(data=rng.uniform(0, 3, size=(4, 6)), beta=3.5, source_metric=Metric.NEG_L1)
    loaded = load_similarity(save_similarity(S, tmp_path / "s.upsm"))
    np.testing.assert_array_equal(loaded.data, S.data)
    assert loaded.beta == 3.5
    assert loaded.source_metric is Metric.NEG_L1


def test_file_size_follows_layout(tmp_path):
    path = save_similarity(SimilarityMatrix(data=np.ones((2, 3))), tmp_path / "s.upsm")
    assert path.stat().st_size == 4 + 1 + 8 + 8 + 8 * 6 + 8 + 1
    assert path.read_bytes()[:4] == b"UPSM"


def test_bad_magic(tmp_path):
    path = tmp_path / "s.upsm"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(FormatError):
        load_similarity(path)


def test_truncated_payload(tmp_path):
    path = save_similarity(SimilarityMatrix(data=np.ones((2, 3))), tmp_path / "s.upsm")
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(FormatError):
        load_similarity(path)


def test_unknown_metric_code(tmp_path):
    path = save_similarity(SimilarityMatrix(data=np.ones((1, 1))), tmp_path / "s.upsm")
    path.write_bytes(path.read_bytes()[:-1] + bytes([99]))
    with pytest.raises(InvalidInputError):
        load_similarity(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataFileError):
        load_similarity(tmp_path / "absent.upsm")
