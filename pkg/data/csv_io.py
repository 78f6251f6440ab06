"""
CSV ingestion: header row, comma delimiter, '.' decimal separator, optional
integer label column. Floats are written with 17 significant digits so a
save/load round trip reproduces them.
"""
import re
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.errors import DataFileError, FormatError, InvalidInputError, NonNumericCellError, RaggedRowError
from data.longtail_generator import Dataset

PathLike = Union[str, Path]


def save_csv(dataset: Dataset, path: PathLike, label_column: str = "label") -> Path:
    path = Path(path)
    columns = [f"x{i}" for i in range(dataset.features.shape[1])]
    frame = pd.DataFrame(dataset.features, columns=columns)
    if dataset.labels is not None:
        frame[label_column] = dataset.labels
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise DataFileError(f"no such file: {path}")
    try:
        # header=None so a long first row is an error, not an implicit index;
        # the python engine pads short rows with None and keeps empty cells as ""
        raw = pd.read_csv(path, header=None, dtype=object, na_filter=False, engine="python", encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise FormatError(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        found = re.search(r"Expected (\d+) fields in line (\d+), saw (\d+)", str(e))
        if found is None:
            raise FormatError(f"{path}: {e}") from e
        expected, line, seen = (int(g) for g in found.groups())
        row = max(line - 2, 0)
        raise RaggedRowError(f"{path}: data row {row} (line {line}) has {seen} fields, header has {expected}",
                             row=row) from e
    except UnicodeDecodeError as e:
        raise FormatError(f"{path} is not UTF-8: {e}") from e
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = [str(name).strip() for name in raw.iloc[0]]
    return frame


def _map_labels(path: Path, raw: np.ndarray,
                label_mapping: Optional[Dict[str, int]]) -> Tuple[np.ndarray, Dict[str, int]]:
    if label_mapping is None:
        original, labels = np.unique(raw, return_inverse=True)
        return labels.astype(np.int64), {str(int(value)): int(i) for i, value in enumerate(original)}
    labels = np.empty(raw.shape[0], dtype=np.int64)
    for row, value in enumerate(raw):
        key = str(int(value))
        if key not in label_mapping:
            raise InvalidInputError(f"{path}: label {key} in data row {row} is not among the known labels "
                                    f"{sorted(label_mapping, key=int)}")
        labels[row] = label_mapping[key]
    return labels, dict(label_mapping)


def load_csv(path: PathLike, label_column: Optional[str] = None,
             label_mapping: Optional[Dict[str, int]] = None) -> Dataset:
    """
    Parse a numeric CSV into a Dataset.

    Args:
        path: file to read.
        label_column: header name of the integer label column, if any. Labels are
            remapped to contiguous ids; the mapping is kept on the dataset.
        label_mapping: reuse another file's mapping (original label -> id) so both
            files share class ids even when this one lacks some classes.

    Raises:
        DataFileError: the file does not exist.
        RaggedRowError: a row has a different number of fields than the header.
        NonNumericCellError: a feature or label cell does not parse.
        InvalidInputError: a label is missing from `label_mapping`.
        FormatError: empty file, bad encoding, or unknown label column.
    """
    path = Path(path)
    frame = _read_frame(path)
    if frame.empty:
        raise FormatError(f"{path} has a header but no data rows")
    header = list(frame.columns)

    short = np.flatnonzero(frame.isna().any(axis=1).to_numpy())
    if short.size:
        row = int(short[0])
        width = int(frame.iloc[row].notna().sum())
        raise RaggedRowError(
            f"{path}: data row {row} (line {row + 2}) has {width} fields, header has {len(header)}", row=row
        )

    if label_column is not None and label_column not in frame.columns:
        raise FormatError(f"{path}: no column named {label_column!r}")

    numeric = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    bad = numeric.isna().to_numpy()
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        raise NonNumericCellError(
            f"{path}: cell {frame.iat[row, col]!r} in data row {row}, column {header[col]!r} is not numeric",
            row=row, column=header[col],
        )

    feature_columns = [c for c in header if c != label_column]
    if not feature_columns:
        raise FormatError(f"{path}: no feature columns")
    features = numeric[feature_columns].to_numpy(dtype=np.float64)

    if label_column is None:
        return Dataset(features=features)

    raw_labels = numeric[label_column].to_numpy()
    fractional = np.flatnonzero(raw_labels != np.round(raw_labels))
    if fractional.size:
        row = int(fractional[0])
        raise NonNumericCellError(f"{path}: label in data row {row} is not an integer", row=row, column=label_column)
    labels, mapping = _map_labels(path, raw_labels.astype(np.int64), label_mapping)
    return Dataset(features=features, labels=labels, num_classes=len(mapping), label_mapping=mapping)
