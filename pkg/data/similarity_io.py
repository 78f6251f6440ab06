"""
Binary similarity matrix files.

Layout, little endian: b"UPSM", version u8 = 1, m u64, n u64, m*n f64 row-major,
beta f64, metric u8.
"""
from pathlib import Path
from typing import Union

import numpy as np

from core.containers import Metric, SimilarityMatrix
from core.errors import DataFileError, FormatError

MAGIC = b"UPSM"
VERSION = 1
HEADER = np.dtype([("magic", "S4"), ("version", "u1"), ("m", "<u8"), ("n", "<u8")])


def save_similarity(S: SimilarityMatrix, path: Union[str, Path]) -> Path:
    path = Path(path)
    header = np.array([(MAGIC, VERSION, S.rows, S.cols)], dtype=HEADER)
    payload = b"".join([
        header.tobytes(),
        S.data.astype("<f8").tobytes(order="C"),
        np.array([S.beta], dtype="<f8").tobytes(),
        np.array([S.source_metric.code], dtype="u1").tobytes(),
    ])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return path


def load_similarity(path: Union[str, Path]) -> SimilarityMatrix:
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"no such file: {path}")
    raw = path.read_bytes()
    if len(raw) < HEADER.itemsize or raw[:4] != MAGIC:
        raise FormatError(f"{path} is not a similarity file")
    header = np.frombuffer(raw, dtype=HEADER, count=1)[0]
    if int(header["version"]) != VERSION:
        raise FormatError(f"{path}: unsupported version {int(header['version'])}")
    m, n = int(header["m"]), int(header["n"])
    expected = HEADER.itemsize + 8 * m * n + 8 + 1
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {m}x{n}, found {len(raw)}")

    offset = HEADER.itemsize
    data = np.frombuffer(raw, dtype="<f8", count=m * n, offset=offset).reshape(m, n)
    beta = float(np.frombuffer(raw, dtype="<f8", count=1, offset=offset + 8 * m * n)[0])
    metric = Metric.from_code(int(raw[-1]))
    return SimilarityMatrix(data=data.astype(np.float64), beta=beta, source_metric=metric)
