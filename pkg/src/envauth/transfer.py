"""Joint environment estimation across feature domains with a transfer weight."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .distance import calibrate_threshold
from .environment import (
    EnvironmentTransform,
    _fuse_from_sums,
    _weighted_sums,
    estimate_transform,
)
from .errors import InvalidInput, UnsupportedTransfer
from .fingerprint import FingerprintMatrix, ReferenceFingerprint


@dataclass(frozen=True)
class TransferConfig:
    """Transfer weight plus the disjoint target and source object id sets."""

    alpha: float
    target_ids: frozenset[str]
    source_ids: frozenset[str]

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidInput("alpha must be finite and >= 0")
        target = frozenset(self.target_ids)
        source = frozenset(self.source_ids)
        if target & source:
            raise InvalidInput("target and source ids must be disjoint")
        object.__setattr__(self, "target_ids", target)
        object.__setattr__(self, "source_ids", source)


def estimate_source_transforms(
    source_observations: Mapping[str, FingerprintMatrix],
    source_references: Mapping[str, ReferenceFingerprint],
) -> dict[str, EnvironmentTransform]:
    """Per-object transform estimates for the source domain.

    Identical estimator to the target domain; objects are independent, so a
    corrupted source only affects its own estimate.
    """
    if not source_observations:
        raise InvalidInput("no source observations")
    dimension = None
    transforms = {}
    for object_id in sorted(source_observations):
        if object_id not in source_references:
            raise InvalidInput(f"missing reference for source {object_id!r}")
        observed = source_observations[object_id]
        if dimension is None:
            dimension = observed.dimension
        elif observed.dimension != dimension:
            raise InvalidInput("source objects must share a common dimension")
        transforms[object_id] = estimate_transform(
            observed, source_references[object_id]
        )
    return transforms


def joint_fuse(
    target_transforms: Sequence[EnvironmentTransform],
    target_weights: Sequence[float],
    source_transforms: Sequence[EnvironmentTransform],
    source_weights: Sequence[float],
    alpha: float,
) -> EnvironmentTransform:
    """Fuse target and alpha-weighted source transforms into one estimate.

    The translation is the exact stationary point of the joint weighted
    least-squares objective; the rotation is the special-orthogonal
    projection of the corresponding weighted sum. ``alpha = 0`` reproduces
    the no-transfer fusion bit for bit.
    """
    if not np.isfinite(alpha) or alpha < 0:
        raise InvalidInput("alpha must be finite and >= 0")
    if not target_transforms:
        raise InvalidInput("need at least one target transform")
    rotation_sum, translation_sum, weight_total = _weighted_sums(
        target_transforms, target_weights
    )
    if alpha > 0 and source_transforms:
        if source_transforms[0].dimension != target_transforms[0].dimension:
            raise UnsupportedTransfer(
                "source and target transforms have different dimensions"
            )
        source_rot, source_tr, source_weight = _weighted_sums(
            source_transforms, source_weights
        )
        rotation_sum = rotation_sum + alpha * source_rot
        translation_sum = translation_sum + alpha * source_tr
        weight_total = weight_total + alpha * source_weight
    return _fuse_from_sums(rotation_sum, translation_sum, weight_total)


def transfer_threshold(
    source_legit_distances: Sequence[float],
    source_attacker_distances: Sequence[float] = (),
    margin: float = 0.1,
) -> float:
    """Calibrate a threshold on source-domain distances for use on the target."""
    return calibrate_threshold(
        source_legit_distances, source_attacker_distances, margin=margin
    )
