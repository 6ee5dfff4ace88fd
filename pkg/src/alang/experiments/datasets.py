"""UCI-style CSV ingestion for the classification experiments."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DatasetError

__all__ = ["Dataset", "Standardization", "load_dataset", "FORMATS"]

FORMATS = ("wdbc", "banknote", "csv", "sklearn:breast_cancer")


@dataclass(frozen=True)
class Standardization:
    """Per-column affine map ``z = (x - mean) / scale``; constant columns keep scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def invert(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.mean

    @classmethod
    def fit(cls, X) -> "Standardization":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, binary labels and how the features were transformed.

    ``raw_dim`` counts every column in the source file (identifier and label
    included); ``dim`` is the number of features actually used.
    """

    X: np.ndarray
    y: np.ndarray
    name: str
    raw_dim: int
    standardization: Standardization | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def raw_features(self) -> np.ndarray:
        return self.X if self.standardization is None else self.standardization.invert(self.X)


def _read_rows(path: Path, delimiter=","):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return rows


def _to_float(cell: str, row: int, col: int, path) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DatasetError(f"{path}: row {row + 1}, column {col + 1}: cannot parse {cell!r}") from None
    if not np.isfinite(v):
        raise DatasetError(f"{path}: row {row + 1}, column {col + 1}: non-finite value")
    return v


def _check_width(rows, width, path):
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DatasetError(f"{path}: row {i + 1} has {len(r)} columns, expected {width}")


def _parse_wdbc(path):
    rows = _read_rows(path)
    _check_width(rows, 32, path)
    labels = {"M": 1, "B": 0}
    y, X = [], []
    for i, r in enumerate(rows):
        tag = r[1].strip()
        if tag not in labels:
            raise DatasetError(f"{path}: row {i + 1}, column 2: diagnosis {tag!r} is not M or B")
        y.append(labels[tag])
        X.append([_to_float(c, i, j + 2, path) for j, c in enumerate(r[2:])])
    return np.array(X), np.array(y), 32


def _parse_label_last(path, width=None, header=False):
    rows = _read_rows(path)
    if header:
        rows = rows[1:]
    width = width or len(rows[0])
    _check_width(rows, width, path)
    data = np.array([[_to_float(c, i, j, path) for j, c in enumerate(r)] for i, r in enumerate(rows)])
    y = data[:, -1]
    if not np.all((y == 0) | (y == 1)):
        bad = int(np.flatnonzero((y != 0) & (y != 1))[0])
        raise DatasetError(f"{path}: row {bad + 1}, column {width}: label {y[bad]!r} is not 0 or 1")
    return data[:, :-1], y.astype(int), width


def _sklearn_breast_cancer():
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise DatasetError("sklearn:breast_cancer needs scikit-learn installed") from exc
    bunch = load_breast_cancer()
    # scikit-learn codes malignant as 0; WDBC convention is malignant -> 1
    return np.asarray(bunch.data, dtype=float), 1 - np.asarray(bunch.target, dtype=int), 32


def load_dataset(path, fmt: str = "csv", standardize: bool = True, header: bool = False) -> Dataset:
    """Read a binary classification data set.

    Formats
    -------
    ``wdbc``
        ``id, M|B, 30 features``; the identifier is dropped and ``M -> 1``.
    ``banknote``
        Four features followed by a 0/1 label.
    ``csv``
        Any width, label in the last column.
    ``sklearn:breast_cancer``
        The copy of WDBC bundled with scikit-learn; ``path`` is ignored.

    Raises
    ------
    DatasetError
        On unreadable files, unparsable cells (with row and column) or a
        wrong column count.
    """
    if fmt == "sklearn:breast_cancer":
        X, y, raw = _sklearn_breast_cancer()
        name = "wdbc"
    else:
        p = Path(path)
        if fmt == "wdbc":
            X, y, raw = _parse_wdbc(p)
        elif fmt == "banknote":
            X, y, raw = _parse_label_last(p, width=5, header=header)
        elif fmt == "csv":
            X, y, raw = _parse_label_last(p, header=header)
        else:
            raise DatasetError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        name = p.stem
    std = Standardization.fit(X) if standardize else None
    if std is not None:
        X = std.apply(X)
    return Dataset(X, y, name, raw, std, {"format": fmt})
