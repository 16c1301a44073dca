import numpy as np
import pytest

from envauth.environment import EnvironmentTransform, fuse_transforms
from envauth.errors import InvalidInput, UnsupportedTransfer
from envauth.fingerprint import FingerprintMatrix, ReferenceFingerprint
from envauth.transfer import (
    TransferConfig,
    estimate_source_transforms,
    joint_fuse,
    transfer_threshold,
)
from envauth.distance import calibrate_threshold

from oracles import (
    gradient_descent_rotation_fusion,
    random_rotation,
    rotation_fusion_objective,
)


def matrix(values, object_id="s0"):
    values = np.asarray(values, float)
    return FingerprintMatrix(
        values=values,
        object_id=object_id,
        window_index=0,
        feature_names=tuple(f"g{i}" for i in range(values.shape[1])),
    )


def reference_of(values, object_id="s0"):
    ref_matrix = matrix(values, object_id=object_id)
    return ReferenceFingerprint(
        matrix=FingerprintMatrix(
            values=ref_matrix.values,
            object_id=object_id,
            window_index=-1,
            feature_names=ref_matrix.feature_names,
        )
    )


def moved(translation, rotation=None, m=2):
    rotation = np.eye(m) if rotation is None else rotation
    return EnvironmentTransform(rotation=rotation, translation=np.asarray(translation, float))


def test_config_validation():
    config = TransferConfig(alpha=0.25, target_ids=frozenset({"a"}), source_ids=frozenset({"b"}))
    assert config.alpha == 0.25
    with pytest.raises(InvalidInput):
        TransferConfig(alpha=-1.0, target_ids=frozenset(), source_ids=frozenset())
    with pytest.raises(InvalidInput):
        TransferConfig(alpha=0.5, target_ids=frozenset({"a"}), source_ids=frozenset({"a"}))


def test_source_estimates_zero_environment():
    rng = np.random.default_rng(0)
    observations = {}
    references = {}
    for i in range(3):
        base = rng.standard_normal((8, 3))
        observations[f"s{i}"] = matrix(base, object_id=f"s{i}")
        references[f"s{i}"] = reference_of(base, object_id=f"s{i}")
    transforms = estimate_source_transforms(observations, references)
    for transform in transforms.values():
        np.testing.assert_allclose(transform.rotation, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(transform.translation, np.zeros(3), atol=1e-9)


def test_source_estimates_shared_transform():
    rng = np.random.default_rng(1)
    rotation = random_rotation(rng, 3, max_angle=0.4)
    shift = rng.uniform(-2, 2, 3)
    observations = {}
    references = {}
    for i in range(4):
        base = rng.standard_normal((10, 3))
        observations[f"s{i}"] = matrix(base @ rotation.T + shift, object_id=f"s{i}")
        references[f"s{i}"] = reference_of(base, object_id=f"s{i}")
    transforms = estimate_source_transforms(observations, references)
    values = list(transforms.values())
    for transform in values[1:]:
        assert np.abs(transform.rotation - values[0].rotation).max() < 1e-9
        assert np.abs(transform.translation - values[0].translation).max() < 1e-9


def test_corrupted_source_does_not_leak():
    rng = np.random.default_rng(2)
    bases = {f"s{i}": rng.standard_normal((8, 2)) for i in range(3)}
    references = {k: reference_of(v, object_id=k) for k, v in bases.items()}
    clean = {k: matrix(v + 0.1, object_id=k) for k, v in bases.items()}
    corrupted = dict(clean)
    corrupted["s1"] = matrix(
        bases["s1"] + 50.0 * rng.standard_normal((8, 2)), object_id="s1"
    )
    out_clean = estimate_source_transforms(clean, references)
    out_corrupted = estimate_source_transforms(corrupted, references)
    # per-object independence: untouched estimates are bit-identical
    for key in ("s0", "s2"):
        np.testing.assert_array_equal(
            out_clean[key].translation, out_corrupted[key].translation
        )
        np.testing.assert_array_equal(
            out_clean[key].rotation, out_corrupted[key].rotation
        )
    assert np.abs(out_corrupted["s1"].translation - out_clean["s1"].translation).max() > 1.0


def test_source_dimension_consistency():
    rng = np.random.default_rng(3)
    observations = {
        "s0": matrix(rng.standard_normal((4, 2)), object_id="s0"),
        "s1": matrix(rng.standard_normal((4, 3)), object_id="s1"),
    }
    references = {
        "s0": reference_of(rng.standard_normal((4, 2)), object_id="s0"),
        "s1": reference_of(rng.standard_normal((4, 3)), object_id="s1"),
    }
    with pytest.raises(InvalidInput):
        estimate_source_transforms(observations, references)


def test_alpha_zero_is_bitwise_no_transfer():
    rng = np.random.default_rng(4)
    targets = [
        EnvironmentTransform(
            rotation=random_rotation(rng, 3), translation=rng.uniform(-2, 2, 3)
        )
        for _ in range(3)
    ]
    target_weights = list(rng.uniform(0.2, 1.0, 3))
    sources = [
        EnvironmentTransform(
            rotation=random_rotation(rng, 3), translation=rng.uniform(-2, 2, 3)
        )
        for _ in range(5)
    ]
    plain = fuse_transforms(targets, target_weights)
    joint = joint_fuse(targets, target_weights, sources, [1.0] * 5, 0.0)
    np.testing.assert_array_equal(plain.rotation, joint.rotation)
    np.testing.assert_array_equal(plain.translation, joint.translation)


def test_alpha_large_converges_to_source():
    rng = np.random.default_rng(5)
    target = [moved([0.0, 0.0], rotation_2d_like(rng))]
    source_transform = EnvironmentTransform(
        rotation=random_rotation(rng, 2), translation=np.array([3.0, -1.0])
    )
    fused = joint_fuse(target, [1.0], [source_transform], [1.0], 1e9)
    np.testing.assert_allclose(fused.translation, source_transform.translation, atol=1e-6)
    np.testing.assert_allclose(fused.rotation, source_transform.rotation, atol=1e-6)


def rotation_2d_like(rng):
    return random_rotation(rng, 2, max_angle=0.3)


def test_joint_stationary_point_hand_example():
    target = [moved([0.0, 0.0])]
    source = [moved([2.0, 0.0])]
    fused = joint_fuse(target, [1.0], source, [1.0], 1.0)
    np.testing.assert_array_equal(fused.translation, [1.0, 0.0])
    # gradient-descent oracle on the joint objective confirms the rotation
    rotations = [t.rotation for t in target] + [t.rotation for t in source]
    weights = [1.0, 1.0]
    ours = rotation_fusion_objective(fused.rotation, rotations, weights)
    oracle = gradient_descent_rotation_fusion(
        rotations, weights, 2, np.random.default_rng(0)
    )
    assert ours <= oracle + 1e-8


def test_joint_translation_closed_form_random():
    rng = np.random.default_rng(6)
    for _ in range(20):
        nt = int(rng.integers(1, 4))
        ns = int(rng.integers(1, 5))
        alpha = float(rng.uniform(0.1, 2.0))
        targets = [
            EnvironmentTransform(rotation=random_rotation(rng, 3),
                                 translation=rng.uniform(-2, 2, 3))
            for _ in range(nt)
        ]
        sources = [
            EnvironmentTransform(rotation=random_rotation(rng, 3),
                                 translation=rng.uniform(-2, 2, 3))
            for _ in range(ns)
        ]
        tw = rng.uniform(0.2, 1.5, nt)
        sw = rng.uniform(0.2, 1.5, ns)
        fused = joint_fuse(targets, tw, sources, sw, alpha)
        numerator = sum(
            w * t.translation for w, t in zip(tw, targets)
        ) + alpha * sum(w * s.translation for w, s in zip(sw, sources))
        denominator = tw.sum() + alpha * sw.sum()
        np.testing.assert_allclose(fused.translation, numerator / denominator, atol=1e-12)


def test_joint_dimension_mismatch():
    target = [moved([0.0, 0.0])]
    source = [moved([0.0, 0.0, 0.0], m=3)]
    with pytest.raises(UnsupportedTransfer):
        joint_fuse(target, [1.0], source, [1.0], 0.5)


def test_joint_requires_target():
    with pytest.raises(InvalidInput):
        joint_fuse([], [], [moved([0.0, 0.0])], [1.0], 0.5)


def test_transfer_threshold_delegates():
    legit = [0.5, 1.0, 2.0]
    attackers = [10.0, 12.0]
    assert transfer_threshold(legit, attackers) == calibrate_threshold(legit, attackers)
    assert transfer_threshold([1.0, 2.0], [10.0, 11.0]) == 6.0
    assert transfer_threshold([1.0, 2.0, 3.0]) == pytest.approx(3.3, abs=1e-12)
