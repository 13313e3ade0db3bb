"""Datasets: CSV ingestion, synthetic generation, missing-value masking, folds.

Missing cells are stored as ``NaN`` in a float64 feature matrix.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import ParseError, ValidationError

MISSING_MARKERS = ("", "nan")
LABEL_COLUMN = "label"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Instance-by-feature matrix (``NaN`` = missing) with integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError(
                f"labels length {y.shape[0] if y.ndim else 0} != instance count {X.shape[0]}"
            )
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise ValidationError("labels must be integers")
        y = y.astype(np.int64)
        names = tuple(self.feature_names) or tuple(f"f{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValidationError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be unique")
        if np.isinf(X).any():
            raise ValidationError("features must be finite or missing")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def M(self) -> int:
        return self.features.shape[0]

    @property
    def T(self) -> int:
        return self.features.shape[1]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.features)

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def require_two_classes(self):
        if self.classes.size < 2:
            raise ValidationError(
                f"need at least 2 label classes, found {self.classes.size}"
            )

    def subset(self, rows=None, columns=None) -> "Dataset":
        """Row and/or column restriction, preserving order."""
        X, y, names = self.features, self.labels, self.feature_names
        if rows is not None:
            X, y = X[rows], y[rows]
        if columns is not None:
            columns = list(columns)
            X = X[:, columns]
            names = tuple(names[j] for j in columns)
        return Dataset(X.copy(), y.copy(), names)

    def equals(self, other: "Dataset") -> bool:
        """Exact equality, with missing cells compared by position."""
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.labels, other.labels)
            and self.feature_names == other.feature_names
        )


@dataclass(frozen=True)
class GroundTruth:
    relevant_indices: tuple[int, ...]
    generator_seed: int

    def to_json(self) -> str:
        return json.dumps(
            {"relevant_indices": list(self.relevant_indices), "generator_seed": self.generator_seed}
        )

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        obj = json.loads(text)
        return cls(tuple(int(i) for i in obj["relevant_indices"]), int(obj["generator_seed"]))


@dataclass(frozen=True)
class MaskSpec:
    """Global masking rate ``rate`` in [0, 1) and the seed choosing the cells."""

    rate: float
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.rate < 1.0) or math.isnan(self.rate):
            raise ValidationError(f"missing rate must lie in [0, 1), got {self.rate}")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_MARKERS


def load_csv(source) -> Dataset:
    """Parse a dataset CSV.

    Parameters
    ----------
    source : bytes, str, path-like or binary/text file object
        UTF-8 CSV with a header row whose last column is ``label``.
        Empty cells and ``NaN`` (any case) are missing.

    Raises
    ------
    ParseError
        Wrong row length, non-numeric feature cell, non-integer label, or
        a header without a trailing ``label`` column.
    ValidationError
        Fewer than two label classes.
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", row=1) from None
    header = [h.strip() for h in header]
    if not header or header[-1] != LABEL_COLUMN:
        raise ParseError(f"last header column must be {LABEL_COLUMN!r}", row=1)
    names = header[:-1]
    width = len(header)
    rows, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", row=lineno)
        values = []
        for j, cell in enumerate(row[:-1]):
            if _is_missing(cell):
                values.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r} in column {names[j]!r}", row=lineno
                ) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r} in column {names[j]!r}", row=lineno)
            values.append(v)
        try:
            labels.append(int(row[-1].strip()))
        except ValueError:
            raise ParseError(f"label {row[-1]!r} is not an integer", row=lineno) from None
        rows.append(values)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    try:
        d = Dataset(X, np.array(labels, dtype=np.int64), tuple(names))
    except ValidationError as exc:
        raise ParseError(str(exc), row=1) from None
    d.require_two_classes()
    return d


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str) and "\n" in source:
        return source
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    with open(source, "rb") as fh:
        return fh.read().decode("utf-8")


def format_value(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def dumps_csv(d: Dataset) -> str:
    """Serialise ``d``; missing cells are written as empty fields."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*d.feature_names, LABEL_COLUMN])
    for row, label in zip(d.features, d.labels):
        writer.writerow([*(format_value(v) for v in row), int(label)])
    return buf.getvalue()


def write_csv(d: Dataset, fh) -> None:
    fh.write(dumps_csv(d))


def generate_synthetic(M: int, T: int, n_relevant: int, noise: float = 0.1, seed: int = 0):
    """Gaussian features with a binary label driven by a random subset of columns.

    The label is ``sum(X[:, relevant], axis=1) + noise * eps > 0``.

    Returns
    -------
    (Dataset, GroundTruth)
    """
    if n_relevant < 1:
        raise ValidationError("n_relevant must be at least 1")
    if n_relevant > T:
        raise ValidationError(f"n_relevant={n_relevant} exceeds feature count {T}")
    if M < 20:
        raise ValidationError(f"need at least 20 instances, got {M}")
    if noise < 0 or not math.isfinite(noise):
        raise ValidationError(f"noise must be a finite non-negative number, got {noise}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((M, T))
    relevant = np.sort(rng.choice(T, size=n_relevant, replace=False))
    eps = rng.standard_normal(M)
    y = (X[:, relevant].sum(axis=1) + noise * eps > 0).astype(np.int64)
    d = Dataset(X, y)
    d.require_two_classes()
    return d, GroundTruth(tuple(int(i) for i in relevant), int(seed))


def sparsify(d: Dataset, spec: MaskSpec) -> Dataset:
    """Blank ``round(rate * M * T)`` extra observed cells chosen uniformly at random."""
    count = round(spec.rate * d.M * d.T)
    if count == 0:
        return Dataset(d.features.copy(), d.labels.copy(), d.feature_names)
    observed = np.flatnonzero(~np.isnan(d.features))
    if count > observed.size:
        raise ValidationError(
            f"cannot mask {count} cells: only {observed.size} observed cells remain"
        )
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(observed, size=count, replace=False)
    X = d.features.copy()
    X.flat[chosen] = np.nan
    return Dataset(X, d.labels.copy(), d.feature_names)


def split_folds(d: Dataset, k: int, seed: int = 0) -> FoldPlan:
    """Stratified fold assignment.

    Members of each class are shuffled and dealt round-robin; the dealing
    position carries over between classes so fold sizes differ by at most one.
    """
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    classes, counts = np.unique(d.labels, return_counts=True)
    small = classes[counts < k]
    if small.size:
        raise ValidationError(
            f"class(es) {small.tolist()} have fewer than {k} members; cannot build {k} folds"
        )
    rng = np.random.default_rng(seed)
    assignment = np.empty(d.M, dtype=np.int64)
    offset = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(d.labels == c))
        assignment[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldPlan(k, assignment)


def stream_columns(d: Dataset) -> Iterator[tuple[int, np.ndarray]]:
    for j in range(d.T):
        yield j, d.features[:, j].copy()
