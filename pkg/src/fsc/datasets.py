"""Dataset ingestion: schema-driven CSV loading and benchmark datasets.

The wine and iris benchmarks ship with scikit-learn and load offline.
The crabs data (five morphometric measurements, four groups formed by
species x sex) is not vendored; `scripts/fetch_datasets.py` lists public
sources and writes the expected CSV layout.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import as_matrix
from .exceptions import InputError, ParseError, SchemaError

DATA_DIR_ENV = "FSC_DATA_DIR"


@dataclass(frozen=True)
class DatasetSchema:
    """Which columns hold features and the class label.

    Columns are names when the file has a header, 0-based indices
    otherwise. An empty feature list means "all columns except the
    class column".
    """

    class_col: str | int
    feature_cols: tuple[str | int, ...] = field(default_factory=tuple)
    delimiter: str = ","
    header: bool = True
    standardize: bool = False


def _resolve_columns(schema: DatasetSchema, names: list[str]) -> tuple[list[int], int]:
    def col_index(col) -> int:
        if isinstance(col, int):
            if not 0 <= col < len(names):
                raise SchemaError(f"column index {col} out of range (0..{len(names)-1})")
            return col
        if col not in names:
            raise SchemaError(f"unknown column {col!r}; file has {names}")
        return names.index(col)

    class_idx = col_index(schema.class_col)
    if schema.feature_cols:
        feat_idx = [col_index(c) for c in schema.feature_cols]
    else:
        feat_idx = [i for i in range(len(names)) if i != class_idx]
    if class_idx in feat_idx:
        raise SchemaError(f"class column {schema.class_col!r} overlaps feature columns")
    if not feat_idx:
        raise SchemaError("at least one feature column is required")
    return feat_idx, class_idx


def load_csv(
    path: str | Path, schema: DatasetSchema
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Load (features, classes, class_names) from a delimited text file.

    Classes are compacted to 0..G-1 in first-appearance order. With
    schema.standardize, feature columns are z-scored.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        rows = [row for row in reader if row]
    if not rows:
        raise ParseError(f"{path}: file is empty")

    if schema.header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        names = [str(i) for i in range(len(rows[0]))]
        body = rows
    if not body:
        raise ParseError(f"{path}: no data rows")
    feat_idx, class_idx = _resolve_columns(schema, names)

    X = np.empty((len(body), len(feat_idx)))
    labels: list[str] = []
    for r, row in enumerate(body):
        if len(row) != len(names):
            raise ParseError(
                f"{path}: row {r + 1} has {len(row)} fields, expected {len(names)}"
            )
        for j, c in enumerate(feat_idx):
            cell = row[c].strip()
            if cell == "":
                raise ParseError(f"{path}: missing value at row {r + 1}, column {names[c]!r}")
            try:
                X[r, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at row {r + 1}, "
                    f"column {names[c]!r}"
                ) from None
        cell = row[class_idx].strip()
        if cell == "":
            raise ParseError(
                f"{path}: missing class at row {r + 1}, column {names[class_idx]!r}"
            )
        labels.append(cell)

    class_names: list[str] = []
    seen: dict[str, int] = {}
    truth = np.empty(len(labels), dtype=int)
    for i, lab in enumerate(labels):
        if lab not in seen:
            seen[lab] = len(class_names)
            class_names.append(lab)
        truth[i] = seen[lab]

    if schema.standardize:
        X = standardize(X)
    return X, truth, class_names


def standardize(X) -> np.ndarray:
    """Z-score each column (population variance)."""
    X = as_matrix(X, "X")
    std = X.std(axis=0)
    if np.any(std == 0.0):
        bad = int(np.flatnonzero(std == 0.0)[0])
        raise InputError(f"column {bad} is constant and cannot be standardized")
    return (X - X.mean(axis=0)) / std


def write_csv(
    path: str | Path,
    X: np.ndarray,
    truth: np.ndarray,
    class_names: list[str],
    feature_names: list[str] | None = None,
    class_col: str = "class",
) -> None:
    """Write features + class labels; floats use shortest round-trip form."""
    X = as_matrix(X, "X")
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(X.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(feature_names) + [class_col])
        for i in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[i]] + [class_names[truth[i]]])


def data_dir(override: str | Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def load_crabs_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Load the crabs morphometrics from its conventional CSV layout.

    Expects columns sp, sex, FL, RW, CL, CW, BD (extra columns such as a
    row index are ignored); the four classes are the species/sex combos.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ParseError(f"{path}: file is empty")
    names = [c.strip().strip('"') for c in rows[0]]
    required = ["sp", "sex", "FL", "RW", "CL", "CW", "BD"]
    for col in required:
        if col not in names:
            raise SchemaError(f"{path}: crabs file must contain column {col!r}")
    sp_i, sex_i = names.index("sp"), names.index("sex")
    feat_i = [names.index(c) for c in ["FL", "RW", "CL", "CW", "BD"]]

    X = np.empty((len(rows) - 1, 5))
    combo: list[str] = []
    for r, row in enumerate(rows[1:]):
        for j, c in enumerate(feat_i):
            try:
                X[r, j] = float(row[c].strip().strip('"'))
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {row[c]!r} at row {r + 1}"
                ) from None
        combo.append(f"{row[sp_i].strip().strip(chr(34))}-{row[sex_i].strip().strip(chr(34))}")

    class_names: list[str] = []
    seen: dict[str, int] = {}
    truth = np.empty(len(combo), dtype=int)
    for i, lab in enumerate(combo):
        if lab not in seen:
            seen[lab] = len(class_names)
            class_names.append(lab)
        truth[i] = seen[lab]
    return X, truth, class_names


def load_builtin(
    name: str, directory: str | Path | None = None, standardized: bool = False
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Load a benchmark dataset by name: iris, wine, or crabs.

    iris and wine come from scikit-learn's bundled copies; crabs is read
    from `<data_dir>/crabs.csv` (see scripts/fetch_datasets.py).
    """
    name = name.lower()
    if name == "iris":
        from sklearn.datasets import load_iris

        bunch = load_iris()
        X, truth = bunch.data.astype(float), bunch.target.astype(int)
        class_names = [str(t) for t in bunch.target_names]
    elif name == "wine":
        from sklearn.datasets import load_wine

        bunch = load_wine()
        X, truth = bunch.data.astype(float), bunch.target.astype(int)
        class_names = [str(t) for t in bunch.target_names]
    elif name == "crabs":
        path = data_dir(directory) / "crabs.csv"
        if not path.exists():
            raise ParseError(
                f"crabs data not found at {path}; run scripts/fetch_datasets.py "
                f"or set {DATA_DIR_ENV}"
            )
        X, truth, class_names = load_crabs_csv(path)
    else:
        raise InputError(f"unknown dataset {name!r}; choose iris, wine, or crabs")
    if standardized:
        X = standardize(X)
    return X, truth, class_names
