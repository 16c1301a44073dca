import math

import numpy as np
import pytest

from envauth.distance import (
    MAX_DISTANCE,
    Verdict,
    authenticate,
    bhattacharyya_empirical,
    bhattacharyya_gaussian,
    calibrate_threshold,
)
from envauth.errors import InvalidInput, UnsupportedDimension
from envauth.fingerprint import FingerprintMatrix, GaussianSummary, summarize

from oracles import exhaustive_threshold_sweep


def gauss(mean, cov):
    return GaussianSummary(mean=np.atleast_1d(np.asarray(mean, float)),
                           covariance=np.atleast_2d(np.asarray(cov, float)))


def matrix(values, object_id="obj", window=0):
    values = np.asarray(values, float)
    return FingerprintMatrix(
        values=values,
        object_id=object_id,
        window_index=window,
        feature_names=tuple(f"f{i}" for i in range(values.shape[1])),
    )


def test_identical_summaries_zero_exact():
    rng = np.random.default_rng(0)
    for _ in range(5):
        a = summarize(matrix(rng.standard_normal((10, 3))))
        assert bhattacharyya_gaussian(a, a) == 0.0


def test_hand_value_mean_shift():
    # univariate N(0,1) vs N(1,1): (1/8) * 1 + (1/2) ln 1 = 0.125
    assert bhattacharyya_gaussian(gauss([0.0], [[1.0]]), gauss([1.0], [[1.0]])) == (
        pytest.approx(0.125, abs=1e-12)
    )


def test_hand_value_variance_ratio():
    # univariate N(0,1) vs N(0,4): (1/2) ln(2.5 / sqrt(4)) = 0.5 ln 1.25
    expected = 0.5 * math.log(1.25)
    assert bhattacharyya_gaussian(gauss([0.0], [[1.0]]), gauss([0.0], [[4.0]])) == (
        pytest.approx(expected, abs=1e-12)
    )


def test_symmetry():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = summarize(matrix(rng.standard_normal((8, 4)) + rng.uniform(-2, 2, 4)))
        b = summarize(matrix(rng.standard_normal((8, 4)) + rng.uniform(-2, 2, 4)))
        assert bhattacharyya_gaussian(a, b) == pytest.approx(
            bhattacharyya_gaussian(b, a), abs=1e-14
        )


def test_nonnegative():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = summarize(matrix(rng.standard_normal((6, 3))))
        b = summarize(matrix(rng.standard_normal((6, 3))))
        assert bhattacharyya_gaussian(a, b) >= 0.0


def test_monotone_in_mean_separation():
    cov = np.eye(3)
    previous = -1.0
    for scale in np.linspace(0.0, 5.0, 11):
        d = bhattacharyya_gaussian(
            gauss(np.zeros(3), cov), gauss(scale * np.ones(3), cov)
        )
        if scale > 0:
            assert d > previous
        previous = d


def test_dimension_mismatch():
    with pytest.raises(InvalidInput):
        bhattacharyya_gaussian(gauss([0.0], [[1.0]]), gauss([0.0, 0.0], np.eye(2)))


def test_empirical_identical_zero():
    rng = np.random.default_rng(3)
    a = matrix(rng.standard_normal((50, 2)))
    assert bhattacharyya_empirical(a, a, 8) == 0.0


def test_empirical_disjoint_sentinel():
    a = matrix(np.random.default_rng(0).uniform(0, 1, (30, 1)))
    b = matrix(np.random.default_rng(1).uniform(99, 100, (30, 1)))
    assert bhattacharyya_empirical(a, b, 16) == MAX_DISTANCE


def test_empirical_dimension_cap():
    rng = np.random.default_rng(4)
    a = matrix(rng.standard_normal((10, 4)))
    with pytest.raises(UnsupportedDimension):
        bhattacharyya_empirical(a, a, 8)


def test_empirical_converges_to_gaussian_closed_form():
    # Monte-Carlo at 1e4 samples: within 0.03 of the 0.125 closed form.
    rng = np.random.default_rng(5)
    a = matrix(rng.standard_normal((10_000, 1)))
    b = matrix(rng.standard_normal((10_000, 1)) + 1.0)
    estimate = bhattacharyya_empirical(a, b, 64)
    assert estimate == pytest.approx(0.125, abs=0.03)


def test_empirical_converges_2d():
    rng = np.random.default_rng(6)
    a = matrix(rng.standard_normal((10_000, 2)))
    b = matrix(rng.standard_normal((10_000, 2)) + [0.5, -0.5])
    closed = bhattacharyya_gaussian(
        gauss(np.zeros(2), np.eye(2)), gauss([0.5, -0.5], np.eye(2))
    )
    assert bhattacharyya_empirical(a, b, 32) == pytest.approx(closed, abs=0.05)


def test_authenticate_boundaries():
    assert authenticate(0.1, 0.5).verdict is Verdict.LEGITIMATE
    assert authenticate(0.5, 0.5).verdict is Verdict.LEGITIMATE  # inclusive
    assert authenticate(0.6, 0.5).verdict is Verdict.ATTACKER


def test_authenticate_validation():
    with pytest.raises(InvalidInput):
        authenticate(float("inf"), 1.0)
    with pytest.raises(InvalidInput):
        authenticate(0.1, -0.5)


def test_calibrate_separated_populations():
    assert calibrate_threshold([1.0, 2.0], [10.0, 11.0]) == 6.0


def test_calibrate_fallback_margin():
    assert calibrate_threshold([1.0, 2.0, 3.0]) == pytest.approx(3.3, abs=1e-12)


def test_calibrate_empty_legit():
    with pytest.raises(InvalidInput):
        calibrate_threshold([], [1.0])


def test_calibrate_all_equal():
    assert calibrate_threshold([2.0, 2.0], [2.0]) == 2.0


def test_calibrate_matches_exhaustive_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        legit = list(rng.normal(0.0, 1.0, size=rng.integers(1, 30)))
        attackers = list(rng.normal(rng.uniform(0, 3), 1.0, size=rng.integers(1, 30)))
        assert calibrate_threshold(legit, attackers) == exhaustive_threshold_sweep(
            legit, attackers
        )
