"""Bhattacharyya distances, the authentication test, and threshold calibration."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput, NumericalError, UnsupportedDimension
from .fingerprint import FingerprintMatrix, GaussianSummary

# Returned instead of +inf when two empirical distributions share no support,
# so downstream metrics arithmetic stays total.
MAX_DISTANCE = 1e9

# Histogram-based distance is restricted to low dimension; the Gaussian
# closed form is the pipeline default above that.
MAX_EMPIRICAL_DIMENSION = 3


class Verdict(str, enum.Enum):
    LEGITIMATE = "legitimate"
    ATTACKER = "attacker"


@dataclass(frozen=True)
class AuthDecision:
    """Outcome of one hypothesis test: legitimate iff distance <= threshold."""

    distance: float
    threshold: float
    verdict: Verdict


def bhattacharyya_gaussian(a: GaussianSummary, b: GaussianSummary) -> float:
    """Bhattacharyya distance between two Gaussian summaries.

    Computes ``(1/8) d' S^-1 d + (1/2) ln(det S / sqrt(det Sa det Sb))`` with
    ``d`` the mean difference and ``S`` the average of the two covariances.
    Symmetric, nonnegative, and exactly 0 when the summaries are identical.
    """
    if a.dimension != b.dimension:
        raise InvalidInput("summaries have different dimensions")
    diff = a.mean - b.mean
    pooled = (a.covariance + b.covariance) / 2.0
    try:
        mahalanobis = float(diff @ np.linalg.solve(pooled, diff)) / 8.0
    except np.linalg.LinAlgError as exc:
        raise NumericalError("pooled covariance is singular") from exc
    sign_p, logdet_p = np.linalg.slogdet(pooled)
    sign_a, logdet_a = np.linalg.slogdet(a.covariance)
    sign_b, logdet_b = np.linalg.slogdet(b.covariance)
    if sign_p <= 0 or sign_a <= 0 or sign_b <= 0:
        raise NumericalError("covariance is not positive definite")
    result = mahalanobis + 0.5 * (logdet_p - 0.5 * (logdet_a + logdet_b))
    if not np.isfinite(result):
        raise NumericalError("Bhattacharyya distance overflowed")
    return result


def bhattacharyya_empirical(
    a: FingerprintMatrix,
    b: FingerprintMatrix,
    bins_per_dim: int,
) -> float:
    """Distribution-free Bhattacharyya distance between two sample sets.

    Both matrices are binned on a shared equal-width grid spanning the union
    of their supports (``bins_per_dim`` bins per feature); the distance is
    ``-ln`` of the Bhattacharyya coefficient of the per-bin frequencies.
    Disjoint supports produce the ``MAX_DISTANCE`` sentinel.
    """
    if bins_per_dim < 1:
        raise InvalidInput("bins_per_dim must be >= 1")
    if a.dimension != b.dimension:
        raise InvalidInput("matrices have different dimensions")
    m = a.dimension
    if m > MAX_EMPIRICAL_DIMENSION:
        raise UnsupportedDimension(
            f"empirical form supports m <= {MAX_EMPIRICAL_DIMENSION}, got {m}"
        )
    combined = np.vstack([a.values, b.values])
    edges = []
    for dim in range(m):
        lo = float(combined[:, dim].min())
        hi = float(combined[:, dim].max())
        if lo == hi:
            lo -= 0.5
            hi += 0.5
        edges.append(np.linspace(lo, hi, bins_per_dim + 1))
    counts_a, _ = np.histogramdd(a.values, bins=edges)
    counts_b, _ = np.histogramdd(b.values, bins=edges)
    freq_a = counts_a / a.num_rows
    freq_b = counts_b / b.num_rows
    coefficient = float(np.sum(np.sqrt(freq_a * freq_b)))
    if coefficient <= 0.0:
        return MAX_DISTANCE
    return min(max(0.0, -float(np.log(coefficient))), MAX_DISTANCE)


def authenticate(distance: float, threshold: float) -> AuthDecision:
    """Binary hypothesis test: legitimate iff ``distance <= threshold``."""
    if not np.isfinite(distance) or not np.isfinite(threshold):
        raise InvalidInput("distance and threshold must be finite")
    if threshold < 0:
        raise InvalidInput("threshold must be nonnegative")
    verdict = Verdict.LEGITIMATE if distance <= threshold else Verdict.ATTACKER
    return AuthDecision(distance=float(distance), threshold=float(threshold), verdict=verdict)


def calibrate_threshold(
    legit_distances: Sequence[float],
    attacker_distances: Sequence[float] = (),
    margin: float = 0.1,
) -> float:
    """Pick the threshold maximizing balanced accuracy on training distances.

    Candidates are the midpoints between consecutive sorted distinct
    distances of the combined sample; ties break toward the smaller
    threshold. Without attacker samples the fallback is
    ``max(legit_distances) * (1 + margin)``.
    """
    legit = [float(d) for d in legit_distances]
    attackers = [float(d) for d in attacker_distances]
    if not legit:
        raise InvalidInput("need at least one legitimate distance")
    if not all(np.isfinite(legit)) or not all(np.isfinite(attackers)):
        raise InvalidInput("distances must be finite")
    if not attackers:
        return max(legit) * (1.0 + margin)
    distinct = sorted(set(legit) | set(attackers))
    if len(distinct) == 1:
        # All distances equal: accepting everything is the balanced optimum.
        return distinct[0]
    legit_arr = np.array(legit)
    attacker_arr = np.array(attackers)
    best_tau = None
    best_score = -1.0
    for lo, hi in zip(distinct[:-1], distinct[1:]):
        tau = (lo + hi) / 2.0
        true_accept = float(np.mean(legit_arr <= tau))
        true_reject = float(np.mean(attacker_arr > tau))
        score = (true_accept + true_reject) / 2.0
        if score > best_score:
            best_score = score
            best_tau = tau
    return best_tau
