"""Environment-effect estimation, fusion, and environment-aware authentication.

Everything here uses the forward model: an observed window relates to its
reference as ``observed ~= R @ reference_row + l`` per row. Transforms are
always proper rotations (det = +1) plus a translation; reflections are
rejected as physically implausible environment effects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .distance import AuthDecision, Verdict, authenticate, bhattacharyya_gaussian
from .errors import InvalidInput, NoNeighbors
from .fingerprint import (
    FingerprintMatrix,
    ReferenceFingerprint,
    column_means,
    summarize,
)
from .graph import SimilarityGraph

ORTHOGONALITY_TOL = 1e-10
DETERMINANT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CorrectedReference:
    """A reference fingerprint with the estimated environment effect applied."""

    matrix: FingerprintMatrix


@dataclass(frozen=True, eq=False)
class EnvironmentTransform:
    """A rigid transform (rotation + translation) modeling environment effects.

    ``degenerate`` flags estimates where the geometry could not pin down a
    rotation and the identity fallback was used.
    """

    rotation: np.ndarray
    translation: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=float)
        translation = np.asarray(self.translation, dtype=float)
        if rotation.ndim != 2 or rotation.shape[0] != rotation.shape[1]:
            raise InvalidInput("rotation must be a square matrix")
        m = rotation.shape[0]
        if translation.shape != (m,):
            raise InvalidInput("translation length must match rotation size")
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidInput("transform contains non-finite values")
        gram_error = np.abs(rotation.T @ rotation - np.eye(m)).max()
        if gram_error > ORTHOGONALITY_TOL:
            raise InvalidInput(f"rotation is not orthogonal (error {gram_error:.2e})")
        det = float(np.linalg.det(rotation))
        if abs(det - 1.0) > DETERMINANT_TOL:
            raise InvalidInput(f"rotation must be proper (det {det:.12f})")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @property
    def dimension(self) -> int:
        return int(self.translation.size)


def identity_transform(dimension: int) -> EnvironmentTransform:
    return EnvironmentTransform(
        rotation=np.eye(dimension), translation=np.zeros(dimension)
    )


def project_rotation(matrix: np.ndarray) -> np.ndarray:
    """Nearest proper rotation to ``matrix`` in Frobenius norm, via SVD."""
    u, _, vt = np.linalg.svd(matrix)
    d = np.sign(np.linalg.det(u @ vt))
    scale = np.ones(matrix.shape[0])
    scale[-1] = d if d != 0 else 1.0
    return u @ np.diag(scale) @ vt


def estimate_transform(
    observed: FingerprintMatrix,
    reference: ReferenceFingerprint,
) -> EnvironmentTransform:
    """Least-squares rigid transform mapping the reference onto the observation.

    Rows are paired by index within the window. The rotation comes from the
    SVD of the centered cross-covariance with the determinant sign corrected
    to a proper rotation; the translation aligns the centroids. If the
    cross-covariance is rank-deficient the rotation is not identifiable and
    the identity is returned with the ``degenerate`` flag set.
    """
    ref = reference.matrix
    if observed.values.shape != ref.values.shape:
        raise InvalidInput("observed and reference windows must share shape")
    if observed.feature_names != ref.feature_names:
        raise InvalidInput("observed and reference windows must share features")
    m = observed.dimension
    centroid_obs = column_means(observed.values)
    centroid_ref = column_means(ref.values)
    x = ref.values - centroid_ref
    y = observed.values - centroid_obs
    cross = x.T @ y
    if np.linalg.matrix_rank(cross) < m:
        return EnvironmentTransform(
            rotation=np.eye(m),
            translation=centroid_obs - centroid_ref,
            degenerate=True,
        )
    u, _, vt = np.linalg.svd(cross)
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    scale = np.ones(m)
    scale[-1] = d
    rotation = v @ np.diag(scale) @ u.T
    translation = centroid_obs - rotation @ centroid_ref
    return EnvironmentTransform(rotation=rotation, translation=translation)


def _weighted_sums(
    transforms: Sequence[EnvironmentTransform],
    weights: Sequence[float],
) -> tuple[np.ndarray, np.ndarray, float]:
    if len(transforms) != len(weights):
        raise InvalidInput("one weight per transform required")
    if not transforms:
        raise InvalidInput("need at least one transform")
    m = transforms[0].dimension
    weight_total = 0.0
    rotation_sum = np.zeros((m, m))
    translation_sum = np.zeros(m)
    for transform, weight in zip(transforms, weights):
        weight = float(weight)
        if not np.isfinite(weight) or weight < 0:
            raise InvalidInput("weights must be finite and nonnegative")
        if transform.dimension != m:
            raise InvalidInput("all transforms must share dimension")
        rotation_sum += weight * transform.rotation
        translation_sum += weight * transform.translation
        weight_total += weight
    return rotation_sum, translation_sum, weight_total


def _fuse_from_sums(
    rotation_sum: np.ndarray,
    translation_sum: np.ndarray,
    weight_total: float,
) -> EnvironmentTransform:
    if weight_total <= 0.0:
        raise InvalidInput("weights must not all be zero")
    return EnvironmentTransform(
        rotation=project_rotation(rotation_sum),
        translation=translation_sum / weight_total,
    )


def fuse_transforms(
    neighbor_transforms: Sequence[EnvironmentTransform],
    weights: Sequence[float],
) -> EnvironmentTransform:
    """Weighted MMSE fusion of neighbor transforms.

    The translation is the exact weighted mean. The rotation is the
    projection of the weighted rotation sum onto the special orthogonal
    group, which minimizes the weighted squared Frobenius error among
    orthogonal matrices.
    """
    return _fuse_from_sums(*_weighted_sums(neighbor_transforms, weights))


def correct_reference(
    reference: ReferenceFingerprint,
    transform: EnvironmentTransform,
) -> CorrectedReference:
    """Apply an environment transform to every row of the reference."""
    matrix = reference.matrix
    if transform.dimension != matrix.dimension:
        raise InvalidInput("transform dimension does not match reference")
    corrected = matrix.values @ transform.rotation.T + transform.translation
    return CorrectedReference(
        matrix=FingerprintMatrix(
            values=corrected,
            object_id=matrix.object_id,
            window_index=matrix.window_index,
            feature_names=matrix.feature_names,
        )
    )


def estimate_environment(
    claimed_id: str,
    neighbor_observations: Mapping[str, FingerprintMatrix],
    neighbor_references: Mapping[str, ReferenceFingerprint],
    graph: SimilarityGraph,
    exclude: frozenset[str] | set[str] = frozenset(),
) -> EnvironmentTransform:
    """Fuse the transforms of the claimed object's usable neighbors.

    A neighbor is usable when the graph links it to ``claimed_id`` and both
    its current observation and its reference are available and it is not in
    ``exclude``. Raises :class:`NoNeighbors` when none qualify.
    """
    usable = [
        (neighbor, weight)
        for neighbor, weight in graph.neighbors(claimed_id)
        if neighbor not in exclude
        and neighbor in neighbor_observations
        and neighbor in neighbor_references
    ]
    if not usable:
        raise NoNeighbors(f"no usable neighbors for {claimed_id!r}")
    transforms = [
        estimate_transform(neighbor_observations[nid], neighbor_references[nid])
        for nid, _ in usable
    ]
    return fuse_transforms(transforms, [weight for _, weight in usable])


def plain_distance(
    observed: FingerprintMatrix, reference: ReferenceFingerprint
) -> float:
    """Distance between an observation and an uncorrected reference."""
    return bhattacharyya_gaussian(summarize(observed), summarize(reference.matrix))


def compensated_distance(
    claimed_id: str,
    observed: FingerprintMatrix,
    references: Mapping[str, ReferenceFingerprint],
    submissions: Mapping[str, FingerprintMatrix],
    graph: SimilarityGraph,
) -> float:
    """Distance to the environment-corrected reference of ``claimed_id``.

    Falls back to the plain distance when the claimed object has no usable
    neighbor in the graph.
    """
    reference = references[claimed_id]
    try:
        fused = estimate_environment(claimed_id, submissions, references, graph)
    except NoNeighbors:
        return plain_distance(observed, reference)
    corrected = correct_reference(reference, fused)
    return bhattacharyya_gaussian(summarize(observed), summarize(corrected.matrix))


def authenticate_with_env(
    observed: FingerprintMatrix,
    reference: ReferenceFingerprint,
    neighbor_observations: Mapping[str, FingerprintMatrix],
    neighbor_references: Mapping[str, ReferenceFingerprint],
    graph: SimilarityGraph,
    threshold: float,
) -> AuthDecision:
    """Authenticate after compensating the reference for the shared environment.

    Each neighbor's transform is estimated against its own reference, the
    transforms are fused with the graph similarity weights, the fused
    transform corrects the claimed object's reference, and the observation
    is tested against the corrected reference.
    """
    fused = estimate_environment(
        reference.object_id, neighbor_observations, neighbor_references, graph
    )
    corrected = correct_reference(reference, fused)
    delta_hat = bhattacharyya_gaussian(
        summarize(observed), summarize(corrected.matrix)
    )
    return authenticate(delta_hat, threshold)


def multi_stage_filter(
    all_observations: Mapping[str, FingerprintMatrix],
    all_references: Mapping[str, ReferenceFingerprint],
    graph: SimilarityGraph,
    threshold: float,
    max_rounds: int,
) -> dict[str, AuthDecision]:
    """Iterative authentication that excludes flagged attackers from fusion.

    Each round authenticates every object; objects judged attackers are then
    removed from every neighbor set for all later rounds (exclusion is
    permanent). Iteration stops when a round flags no new attacker or after
    ``max_rounds`` rounds; the returned verdicts are those of the final
    round. An object whose usable neighbor set is empty falls back to the
    plain (uncompensated) test.
    """
    if max_rounds < 1:
        raise InvalidInput("max_rounds must be >= 1")
    excluded: set[str] = set()
    decisions: dict[str, AuthDecision] = {}
    for _ in range(max_rounds):
        decisions = {}
        for object_id in sorted(all_observations):
            observed = all_observations[object_id]
            reference = all_references[object_id]
            try:
                fused = estimate_environment(
                    object_id,
                    all_observations,
                    all_references,
                    graph,
                    exclude=excluded,
                )
            except NoNeighbors:
                delta = bhattacharyya_gaussian(
                    summarize(observed), summarize(reference.matrix)
                )
                decisions[object_id] = authenticate(delta, threshold)
                continue
            corrected = correct_reference(reference, fused)
            delta_hat = bhattacharyya_gaussian(
                summarize(observed), summarize(corrected.matrix)
            )
            decisions[object_id] = authenticate(delta_hat, threshold)
        newly_flagged = {
            object_id
            for object_id, decision in decisions.items()
            if decision.verdict is Verdict.ATTACKER and object_id not in excluded
        }
        if not newly_flagged:
            break
        excluded |= newly_flagged
    return decisions
