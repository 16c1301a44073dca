"""Fingerprint matrices, reference selection, and Gaussian summaries."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .features import FeatureVector

# Covariance regularizer scale; applied as eps * (1 + trace/m) * I so that
# degenerate fingerprints (constant or duplicated features) stay invertible.
EPSILON_SCALE = 1e-8


@dataclass(frozen=True, eq=False)
class FingerprintMatrix:
    """n observations of one object inside one time window, stacked row-wise."""

    values: np.ndarray
    object_id: str
    window_index: int
    feature_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidInput("fingerprint matrix must be 2-D")
        n, m = values.shape
        if n < 2:
            raise InvalidInput("fingerprint matrix needs at least 2 rows")
        if m < 1:
            raise InvalidInput("fingerprint matrix needs at least 1 feature")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("fingerprint matrix contains non-finite values")
        names = tuple(self.feature_names)
        if len(names) != m:
            raise InvalidInput("feature_names length does not match columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", names)

    @property
    def num_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True, eq=False)
class ReferenceFingerprint:
    """The training-time window chosen to represent an object."""

    matrix: FingerprintMatrix
    object_id: str = ""

    def __post_init__(self):
        if not self.object_id:
            object.__setattr__(self, "object_id", self.matrix.object_id)
        elif self.object_id != self.matrix.object_id:
            raise InvalidInput("reference object_id does not match its matrix")


@dataclass(frozen=True, eq=False)
class GaussianSummary:
    """Mean vector and regularized covariance of a fingerprint matrix."""

    mean: np.ndarray
    covariance: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.mean.size)


def column_means(values: np.ndarray) -> np.ndarray:
    """Column-wise mean (the window centroid).

    Single source of truth for the centroid: both :func:`summarize` and the
    transform estimator in :mod:`envauth.environment` call this.
    """
    return np.mean(np.asarray(values, dtype=float), axis=0)


def build_matrix(
    vectors: Sequence[FeatureVector],
    object_id: str,
    window_index: int,
) -> FingerprintMatrix:
    """Stack feature vectors into a fingerprint matrix, preserving row order."""
    if len(vectors) < 2:
        raise InvalidInput("need at least 2 feature vectors per window")
    names = vectors[0].feature_names
    for i, vec in enumerate(vectors):
        if vec.feature_names != names:
            raise InvalidInput(
                f"row {i} has features {vec.feature_names}, expected {names}"
            )
    values = np.stack([vec.values for vec in vectors])
    return FingerprintMatrix(
        values=values,
        object_id=object_id,
        window_index=window_index,
        feature_names=names,
    )


def summarize(matrix: FingerprintMatrix) -> GaussianSummary:
    """Gaussian summary: centroid and regularized population covariance."""
    values = matrix.values
    mean = column_means(values)
    centered = values - mean
    cov = (centered.T @ centered) / values.shape[0]
    m = values.shape[1]
    eps = EPSILON_SCALE * (1.0 + float(np.trace(cov)) / m)
    cov = cov + eps * np.eye(m)
    return GaussianSummary(mean=mean, covariance=cov)


def select_reference(training: Sequence[FingerprintMatrix]) -> ReferenceFingerprint:
    """Pick the medoid training window as the object's reference.

    The medoid minimizes the sum of Gaussian Bhattacharyya distances to every
    other training window; ties break toward the lowest window index, which
    also makes the result independent of input order.
    """
    from .distance import bhattacharyya_gaussian

    if not training:
        raise InvalidInput("need at least one training matrix")
    object_id = training[0].object_id
    names = training[0].feature_names
    for matrix in training:
        if matrix.object_id != object_id:
            raise InvalidInput("training matrices must belong to one object")
        if matrix.feature_names != names:
            raise InvalidInput("training matrices must share feature names")
    ordered = sorted(training, key=lambda matrix: matrix.window_index)
    if len(ordered) == 1:
        return ReferenceFingerprint(matrix=ordered[0])
    summaries = [summarize(matrix) for matrix in ordered]
    best_index = 0
    best_cost = np.inf
    for i, summary in enumerate(summaries):
        cost = sum(
            bhattacharyya_gaussian(summary, other)
            for j, other in enumerate(summaries)
            if j != i
        )
        if cost < best_cost:
            best_cost = cost
            best_index = i
    return ReferenceFingerprint(matrix=ordered[best_index])


def save_fingerprints(matrices: Sequence[FingerprintMatrix], path: str | Path) -> None:
    """Persist fingerprint windows as CSV.

    Columns: object_id, window_index, row_index, then one column per feature.
    """
    if not matrices:
        raise InvalidInput("nothing to save")
    names = matrices[0].feature_names
    for matrix in matrices:
        if matrix.feature_names != names:
            raise InvalidInput("all matrices must share feature names")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_id", "window_index", "row_index", *names])
        for matrix in matrices:
            for row_index, row in enumerate(matrix.values):
                writer.writerow(
                    [
                        matrix.object_id,
                        matrix.window_index,
                        row_index,
                        *[repr(float(v)) for v in row],
                    ]
                )


def load_fingerprints(path: str | Path) -> list[FingerprintMatrix]:
    """Load fingerprint windows from CSV written by :func:`save_fingerprints`."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInput(f"{path}: empty fingerprint file")
    header = rows[0]
    if header[:3] != ["object_id", "window_index", "row_index"]:
        raise InvalidInput(f"{path}: unexpected header {header!r}")
    names = tuple(header[3:])
    if not names:
        raise InvalidInput(f"{path}: no feature columns")
    grouped: dict[tuple[str, int], list[tuple[int, list[float]]]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3 + len(names):
            raise InvalidInput(f"{path}:{lineno}: wrong column count")
        try:
            key = (row[0], int(row[1]))
            row_index = int(row[2])
            values = [float(cell) for cell in row[3:]]
        except ValueError as exc:
            raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
        grouped.setdefault(key, []).append((row_index, values))
    matrices = []
    for (object_id, window_index), entries in sorted(grouped.items()):
        entries.sort(key=lambda item: item[0])
        matrices.append(
            FingerprintMatrix(
                values=np.array([values for _, values in entries]),
                object_id=object_id,
                window_index=window_index,
                feature_names=names,
            )
        )
    return matrices
