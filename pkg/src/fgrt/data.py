"""Dataset loading, z-score normalization and stratified fold assignment."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from fgrt.errors import ArityMismatchError, DataError, EmptyDataError, ParseError


@dataclass(frozen=True)
class Dataset:
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError("X must be 2-D with one row per label")
        if X.shape[1] != len(self.feature_names):
            raise DataError("feature_names must match the number of columns")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DataError("class ids must be dense in [0, n_classes)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, rows) -> "Dataset":
        return Dataset(self.feature_names, self.X[rows], self.y[rows], self.class_names, self.name)

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.feature_names, self.X, y, self.class_names, self.name)


def load_manifest(path) -> dict:
    """Read an optional JSON manifest (``label_column``, ``class_names``)."""
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise DataError(f"manifest {path} must be a JSON object")
    return manifest


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    except IsADirectoryError:
        raise DataError(f"data path is a directory: {path}") from None
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyDataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ParseError(f"{path}: duplicate column names in header", row=1)
    if len(rows) == 1:
        raise EmptyDataError(f"{path} has a header but no data rows")
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}", row=i + 2)
    return header, rows[1:]


def _numeric_block(path, header, body, cols) -> np.ndarray:
    X = np.empty((len(body), len(cols)))
    for i, row in enumerate(body):
        for out_j, j in enumerate(cols):
            cell = row[j].strip()
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise ParseError(
                    f"{path}: row {i + 2}, column {header[j]!r}: cannot parse {cell!r} as a number",
                    row=i + 2, column=header[j],
                )
            X[i, out_j] = value
    return X


def _label_index(path, header, label_column) -> int:
    if label_column is None:
        return len(header) - 1
    if isinstance(label_column, int) or str(label_column).lstrip("-").isdigit():
        idx = int(label_column)
        if not -len(header) <= idx < len(header):
            raise DataError(f"{path}: label column index {idx} out of range")
        return idx % len(header)
    if label_column in header:
        return header.index(label_column)
    raise DataError(f"{path}: no column named {label_column!r}")


def load_csv(path, label_column: str | int | None = None, manifest=None, name: str | None = None) -> Dataset:
    """Load a comma-separated file with a header row.

    The label column is chosen by name or position (default: the last
    column). Labels become class ids in order of first appearance unless
    the manifest lists ``class_names``. Every other cell must parse as a
    finite number; blanks count as missing and are rejected.
    """
    path = Path(path)
    meta = load_manifest(manifest) if isinstance(manifest, (str, Path)) else dict(manifest or {})
    if label_column is None:
        label_column = meta.get("label_column")
    header, body = _read_table(path)
    label_idx = _label_index(path, header, label_column)
    feat_idx = [j for j in range(len(header)) if j != label_idx]
    X = _numeric_block(path, header, body, feat_idx)
    raw_labels = [row[label_idx].strip() for row in body]
    class_names = [str(c) for c in meta.get("class_names") or []]
    if class_names:
        unknown = sorted(set(raw_labels) - set(class_names))
        if unknown:
            raise DataError(f"{path}: labels {unknown} not listed in manifest class_names")
    else:
        for lab in raw_labels:
            if lab not in class_names:
                class_names.append(lab)
    lookup = {c: i for i, c in enumerate(class_names)}
    y = np.array([lookup[lab] for lab in raw_labels], dtype=int)
    return Dataset(tuple(header[j] for j in feat_idx), X, y, tuple(class_names), name or path.stem)


def load_inputs(path, feature_names: Sequence[str], label_column=None) -> tuple[np.ndarray, list[str] | None]:
    """Read the named feature columns (in the given order) for prediction.

    Returns the matrix and the raw label strings when a label column is
    present: the named one, or else the single column left over after
    taking the features.
    """
    header, body = _read_table(path)
    missing = [f for f in feature_names if f not in header]
    if missing:
        raise ArityMismatchError(f"{path}: missing feature columns {missing}")
    X = _numeric_block(path, header, body, [header.index(f) for f in feature_names])
    if label_column is not None:
        label_idx = _label_index(path, header, label_column)
    else:
        extra = [j for j, h in enumerate(header) if h not in set(feature_names)]
        label_idx = extra[0] if len(extra) == 1 else None
    labels = None if label_idx is None else [row[label_idx].strip() for row in body]
    return X, labels


def bundled_names() -> list[str]:
    manifest = json.loads(resources.files("fgrt.datasets").joinpath("manifest.json").read_text())
    return sorted(manifest)


def load_bundled(name: str) -> Dataset:
    """Load one of the KEEL benchmark files shipped with the package."""
    manifest = json.loads(resources.files("fgrt.datasets").joinpath("manifest.json").read_text())
    if name not in manifest:
        raise DataError(f"no bundled dataset {name!r}; choose from {sorted(manifest)}")
    entry = manifest[name]
    with resources.as_file(resources.files("fgrt.datasets").joinpath(entry["file"])) as p:
        return load_csv(p, entry.get("label_column"), name=name)


def resolve_dataset(source: str, label_column=None, manifest=None) -> Dataset:
    """``bundled:<name>`` or a CSV path."""
    if source.startswith("bundled:"):
        return load_bundled(source.split(":", 1)[1])
    return load_csv(source, label_column, manifest)


# ---------------------------------------------------------------------------
# normalization

@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature training statistics (population std, i.e. divide by n).

    ``kept`` lists the retained input columns, ``dropped`` the constant ones.
    """

    mean: tuple[float, ...]
    std: tuple[float, ...]
    kept: tuple[int, ...]
    dropped: tuple[int, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)


def normalize_fit(X, feature_names: Sequence[str] | None = None) -> NormalizationStats:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataError("cannot fit normalization on empty data")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    kept = tuple(int(j) for j in np.flatnonzero(std > 0))
    dropped = tuple(int(j) for j in np.flatnonzero(~(std > 0)))
    warnings = tuple(f"feature {names[j]!r} is constant on the training rows; dropped" for j in dropped)
    return NormalizationStats(
        tuple(float(mean[j]) for j in kept), tuple(float(std[j]) for j in kept), kept, dropped, warnings
    )


def normalize_apply(stats: NormalizationStats, X) -> np.ndarray:
    """Standardize the retained columns of ``X`` with the stored training stats."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return (X[list(stats.kept)] - np.asarray(stats.mean)) / np.asarray(stats.std)
    return (X[:, list(stats.kept)] - np.asarray(stats.mean)) / np.asarray(stats.std)


# ---------------------------------------------------------------------------
# folds

@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]
    seed: int
    flagged_classes: tuple[int, ...] = ()

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) != fold)

    def splits(self):
        for fold in range(self.k):
            yield self.train_indices(fold), self.test_indices(fold)


def stratified_kfold(y, k: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle each class with ``seed`` and deal its rows round-robin over the folds.

    The dealing position carries over from one class to the next, so fold
    sizes stay balanced overall. Classes smaller than ``k`` are flagged.
    """
    y = np.asarray(y, dtype=int)
    if k < 2:
        raise DataError("k must be at least 2")
    if k > y.size:
        raise DataError(f"cannot split {y.size} samples into {k} folds")
    rng = np.random.default_rng(seed)
    assignments = np.empty(y.size, dtype=int)
    offset = 0
    flagged = []
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        assignments[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
        if idx.size < k:
            flagged.append(int(cls))
    return FoldPlan(k, tuple(int(a) for a in assignments), seed, tuple(flagged))
