"""Synthetic environments, legitimate and attacker objects, and scenario metrics.

The generator produces a shared environment trajectory (a rigid transform per
time window), per-object fingerprint windows that follow it, and optionally
an attacker stream that impersonates one of the objects. The scenario runner
trains on the attacker-free first half of the windows, evaluates both the
plain and the environment-compensated pipelines on the second half, and
reports detection and false-positive metrics.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm, logm

from .distance import MAX_DISTANCE, Verdict, bhattacharyya_gaussian, calibrate_threshold
from .environment import (
    EnvironmentTransform,
    compensated_distance,
    correct_reference,
    estimate_transform,
    fuse_transforms,
    plain_distance,
)
from .errors import InvalidInput
from .fingerprint import (
    FingerprintMatrix,
    ReferenceFingerprint,
    select_reference,
    summarize,
)
from .graph import DEFAULT_BETA_MIN, SimilarityGraph, build_graph
from .transfer import joint_fuse

SCHEMA_VERSION = 1
RNG_ALGORITHM = "philox"

# Spread of per-object base feature means and of the rows around them; the
# ratio controls how separable objects are relative to their own scatter.
OBJECT_SPREAD = 4.0
ROW_SPREAD = 1.0

# Source-noise scale per relatedness class (class 1 = most related source
# domain, class 5 = least related), as multiples of the scenario noise sigma.
DEFAULT_CLASS_NOISE_MULTIPLIERS = (0.5, 2.0, 8.0, 32.0, 128.0)

_UINT64_MASK = 0xFFFFFFFFFFFFFFFF


class AttackerKind(str, enum.Enum):
    NONE = "none"
    CYBER_EMULATION = "cyber_emulation"
    CYBER_PHYSICAL = "cyber_physical"


@dataclass(frozen=True)
class NoiseModel:
    """Per-feature i.i.d. Gaussian measurement noise."""

    sigma: float = 0.05

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise InvalidInput("noise.sigma: must be finite and >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    num_objects: int
    num_windows: int = 16
    window_length: int = 32
    feature_dim: int = 7
    env_magnitude: float = 0.5
    env_fidelity: float = 1.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    attacker_kind: AttackerKind = AttackerKind.NONE
    attacker_count: int = 0
    seed: int = 0
    # Scale of the attacker's own (remote) environment relative to the shared
    # one; remote locations see a calmer trajectory than the monitored site.
    attacker_env_scale: float = 0.3
    # Per-feature offset of a cyber-emulation attacker's cloned fingerprint
    # (its emulation quality): 0 would be a perfect hardware clone.
    emulation_offset: float = 3.0

    def __post_init__(self):
        checks = [
            (self.num_objects < 2, "num_objects: must be >= 2"),
            (self.num_windows < 2, "num_windows: must be >= 2"),
            (self.window_length < 2, "window_length: must be >= 2"),
            (self.feature_dim < 1, "feature_dim: must be >= 1"),
            (
                not np.isfinite(self.env_magnitude) or self.env_magnitude < 0,
                "env_magnitude: must be finite and >= 0",
            ),
            (
                not np.isfinite(self.env_fidelity)
                or not 0.0 <= self.env_fidelity <= 1.0,
                "env_fidelity: must lie in [0, 1]",
            ),
            (self.attacker_count < 0, "attacker_count: must be >= 0"),
            (
                self.attacker_count >= self.num_objects,
                "attacker_count: must be smaller than num_objects",
            ),
            (
                (self.attacker_kind is AttackerKind.NONE) != (self.attacker_count == 0),
                "attacker_count: must be 0 iff attacker_kind is none",
            ),
            (
                not 0 <= self.seed <= _UINT64_MASK,
                "seed: must fit in 64 bits",
            ),
            (
                not np.isfinite(self.attacker_env_scale) or self.attacker_env_scale < 0,
                "attacker_env_scale: must be finite and >= 0",
            ),
            (
                not np.isfinite(self.emulation_offset) or self.emulation_offset < 0,
                "emulation_offset: must be finite and >= 0",
            ),
        ]
        for failed, message in checks:
            if failed:
                raise InvalidInput(message)

    @property
    def num_legit(self) -> int:
        return self.num_objects - self.attacker_count

    @property
    def num_training_windows(self) -> int:
        return self.num_windows // 2

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "num_objects": self.num_objects,
            "num_windows": self.num_windows,
            "window_length": self.window_length,
            "feature_dim": self.feature_dim,
            "env_magnitude": self.env_magnitude,
            "env_fidelity": self.env_fidelity,
            "noise": {"sigma": self.noise.sigma},
            "attacker_kind": self.attacker_kind.value,
            "attacker_count": self.attacker_count,
            "seed": self.seed,
            "attacker_env_scale": self.attacker_env_scale,
            "emulation_offset": self.emulation_offset,
        }


_REQUIRED_FIELDS = {
    "schema_version": int,
    "num_objects": int,
    "num_windows": int,
    "window_length": int,
    "feature_dim": int,
    "env_magnitude": (int, float),
    "env_fidelity": (int, float),
    "noise": dict,
    "attacker_kind": str,
    "attacker_count": int,
    "seed": int,
}
_OPTIONAL_FIELDS = {
    "attacker_env_scale": (int, float),
    "emulation_offset": (int, float),
}


def scenario_config_from_dict(raw: Mapping) -> ScenarioConfig:
    """Validate a parsed config JSON object; errors name the offending field."""
    if not isinstance(raw, Mapping):
        raise InvalidInput("config: must be a JSON object")
    known = set(_REQUIRED_FIELDS) | set(_OPTIONAL_FIELDS)
    for name in raw:
        if name not in known:
            raise InvalidInput(f"{name}: unknown field")
    for name, types in _REQUIRED_FIELDS.items():
        if name not in raw:
            raise InvalidInput(f"{name}: missing required field")
        if not isinstance(raw[name], types) or isinstance(raw[name], bool):
            raise InvalidInput(f"{name}: wrong type")
    for name, types in _OPTIONAL_FIELDS.items():
        if name in raw and (not isinstance(raw[name], types) or isinstance(raw[name], bool)):
            raise InvalidInput(f"{name}: wrong type")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise InvalidInput(f"schema_version: expected {SCHEMA_VERSION}")
    noise_raw = raw["noise"]
    for name in noise_raw:
        if name != "sigma":
            raise InvalidInput(f"noise.{name}: unknown field")
    if "sigma" not in noise_raw:
        raise InvalidInput("noise.sigma: missing required field")
    if not isinstance(noise_raw["sigma"], (int, float)) or isinstance(noise_raw["sigma"], bool):
        raise InvalidInput("noise.sigma: wrong type")
    try:
        kind = AttackerKind(raw["attacker_kind"])
    except ValueError as exc:
        choices = ", ".join(k.value for k in AttackerKind)
        raise InvalidInput(f"attacker_kind: must be one of {choices}") from exc
    kwargs = {}
    for name in _OPTIONAL_FIELDS:
        if name in raw:
            kwargs[name] = float(raw[name])
    return ScenarioConfig(
        num_objects=raw["num_objects"],
        num_windows=raw["num_windows"],
        window_length=raw["window_length"],
        feature_dim=raw["feature_dim"],
        env_magnitude=float(raw["env_magnitude"]),
        env_fidelity=float(raw["env_fidelity"]),
        noise=NoiseModel(sigma=float(noise_raw["sigma"])),
        attacker_kind=kind,
        attacker_count=raw["attacker_count"],
        seed=raw["seed"],
        **kwargs,
    )


def load_scenario_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
    return scenario_config_from_dict(raw)


def _stream(seed: int, label: str) -> np.random.Generator:
    """Independent counter-based stream for one purpose within one scenario."""
    digest = hashlib.sha256(label.encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    seq = np.random.SeedSequence(entropy=[seed & _UINT64_MASK, *words])
    return np.random.Generator(np.random.Philox(seq))


# Fraction of a walk step taken along a fixed per-trajectory direction.
# Physical environment changes (temperature ramps, angle sweeps) trend
# rather than revisit past states; the drift keeps trajectories transient
# while the per-step noise std stays at the configured magnitude.
_WALK_DRIFT = 1.0


def _skew_walk(
    rng: np.random.Generator,
    num_windows: int,
    dimension: int,
    magnitude: float,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Drifting random-walk rotation generators (angle capped at
    ``magnitude``) and translations (step std ``magnitude``)."""
    step = magnitude / np.sqrt(num_windows)
    gauss = rng.standard_normal((dimension, dimension))
    generator_drift = step * _WALK_DRIFT * (gauss - gauss.T) / 2.0
    direction = rng.standard_normal(dimension)
    norm = float(np.linalg.norm(direction))
    if norm > 0.0:
        direction = direction / norm
    translation_drift = magnitude * _WALK_DRIFT * direction
    generator = np.zeros((dimension, dimension))
    translation = np.zeros(dimension)
    out = []
    for _ in range(num_windows):
        gauss = rng.standard_normal((dimension, dimension))
        generator = generator + generator_drift + step * (gauss - gauss.T) / 2.0
        translation = (
            translation + translation_drift + magnitude * rng.standard_normal(dimension)
        )
        used = generator
        if magnitude > 0.0:
            angle = float(np.linalg.norm(generator, 2))
            if angle > magnitude:
                used = generator * (magnitude / angle)
        out.append((used, translation.copy()))
    return out


def _transforms_from_walk(
    walk: Sequence[tuple[np.ndarray, np.ndarray]],
) -> list[EnvironmentTransform]:
    return [
        EnvironmentTransform(rotation=expm(generator), translation=translation)
        for generator, translation in walk
    ]


def generate_environment(config: ScenarioConfig) -> list[EnvironmentTransform]:
    """The shared environment trajectory: one proper rotation + translation
    per window, deterministic for a given config seed."""
    rng = _stream(config.seed, "environment")
    walk = _skew_walk(rng, config.num_windows, config.feature_dim, config.env_magnitude)
    return _transforms_from_walk(walk)


def _interpolate(
    transform: EnvironmentTransform, fidelity: float
) -> tuple[np.ndarray, np.ndarray]:
    """Blend between the identity (fidelity 0) and the full transform
    (fidelity 1): linear on the translation, scaled generator on the rotation."""
    if fidelity >= 1.0:
        return transform.rotation, transform.translation
    m = transform.dimension
    if fidelity <= 0.0:
        return np.eye(m), np.zeros(m)
    generator = np.real(logm(transform.rotation))
    generator = (generator - generator.T) / 2.0
    return expm(fidelity * generator), fidelity * transform.translation


def generate_object_data(
    config: ScenarioConfig,
    env: Sequence[EnvironmentTransform],
    object_base: ReferenceFingerprint,
    env_fidelity: float | None = None,
) -> list[FingerprintMatrix]:
    """Windows of one legitimate object following the environment trajectory.

    Window ``t`` applies the (fidelity-interpolated) transform ``env[t]`` to
    every base row and adds i.i.d. Gaussian noise. The noise stream derives
    from the config seed and the object id, so repeated calls are
    bit-identical.
    """
    if len(env) != config.num_windows:
        raise InvalidInput("environment length must equal num_windows")
    base = object_base.matrix
    if base.values.shape != (config.window_length, config.feature_dim):
        raise InvalidInput("object base shape must match the scenario config")
    fidelity = config.env_fidelity if env_fidelity is None else float(env_fidelity)
    if not 0.0 <= fidelity <= 1.0:
        raise InvalidInput("env_fidelity must lie in [0, 1]")
    rng = _stream(config.seed, f"object-noise-{object_base.object_id}")
    sigma = config.noise.sigma
    windows = []
    for t, transform in enumerate(env):
        rotation, translation = _interpolate(transform, fidelity)
        noise = sigma * rng.standard_normal(base.values.shape)
        windows.append(
            FingerprintMatrix(
                values=base.values @ rotation.T + translation + noise,
                object_id=base.object_id,
                window_index=t,
                feature_names=base.feature_names,
            )
        )
    return windows


def spawn_attacker(
    config: ScenarioConfig,
    target_reference: ReferenceFingerprint,
) -> list[FingerprintMatrix]:
    """Windows submitted by an attacker impersonating ``target_reference``.

    A cyber-emulation attacker clones the target's reference up to a fixed
    per-feature offset (its emulation quality); a cyber-physical attacker
    clones it exactly. Either way the attacker sits in its own remote
    environment: an independent trajectory drawn at
    ``env_magnitude * attacker_env_scale``.
    """
    if config.attacker_kind is AttackerKind.NONE:
        raise InvalidInput("attacker_kind must not be none")
    base = target_reference.matrix
    values = base.values.copy()
    if config.attacker_kind is AttackerKind.CYBER_EMULATION:
        values = values + config.emulation_offset
    target_id = target_reference.object_id
    env_rng = _stream(config.seed, f"attacker-environment-{target_id}")
    walk = _skew_walk(
        env_rng,
        config.num_windows,
        config.feature_dim,
        config.env_magnitude * config.attacker_env_scale,
    )
    transforms = _transforms_from_walk(walk)
    noise_rng = _stream(config.seed, f"attacker-noise-{target_id}")
    sigma = config.noise.sigma
    windows = []
    for t, transform in enumerate(transforms):
        noise = sigma * noise_rng.standard_normal(values.shape)
        windows.append(
            FingerprintMatrix(
                values=values @ transform.rotation.T + transform.translation + noise,
                object_id=target_id,
                window_index=t,
                feature_names=base.feature_names,
            )
        )
    return windows


@dataclass(frozen=True)
class _StreamRow:
    stream: str  # legit object id, or "<target>#attacker" for attacker rows
    window: int
    delta: float
    delta_hat: float
    is_attacker: bool


@dataclass(frozen=True)
class _ScenarioData:
    config: ScenarioConfig
    legit_ids: tuple[str, ...]
    hijacked_ids: tuple[str, ...]
    tau: float
    tau_prime: float
    eval_rows: tuple[_StreamRow, ...]


def _object_ids(count: int) -> list[str]:
    return [f"obj{i:02d}" for i in range(count)]


def _make_bases(config: ScenarioConfig, ids: Sequence[str]) -> dict[str, ReferenceFingerprint]:
    names = tuple(f"f{j + 1}" for j in range(config.feature_dim))
    bases = {}
    for object_id in ids:
        rng = _stream(config.seed, f"object-base-{object_id}")
        center = OBJECT_SPREAD * rng.standard_normal(config.feature_dim)
        rows = center + ROW_SPREAD * rng.standard_normal(
            (config.window_length, config.feature_dim)
        )
        bases[object_id] = ReferenceFingerprint(
            matrix=FingerprintMatrix(
                values=rows,
                object_id=object_id,
                window_index=-1,
                feature_names=names,
            )
        )
    return bases


def _window_step_history(
    windows: Sequence[FingerprintMatrix],
    reference: ReferenceFingerprint,
) -> list[EnvironmentTransform]:
    """Per-window environment movement of one object during training.

    Uses window-over-window increments so the history does not depend on
    which training window was selected as the reference; objects sharing an
    environment then share histories exactly, which is what the similarity
    graph is meant to measure. A single-window history falls back to the
    transform against the reference.
    """
    if len(windows) < 2:
        return [estimate_transform(windows[0], reference)]
    return [
        estimate_transform(
            windows[t], ReferenceFingerprint(matrix=windows[t - 1])
        )
        for t in range(1, len(windows))
    ]


def _scenario_data(config: ScenarioConfig) -> _ScenarioData:
    legit_ids = _object_ids(config.num_legit)
    hijacked = tuple(legit_ids[: config.attacker_count])
    bases = _make_bases(config, legit_ids)
    env = generate_environment(config)
    windows = {
        object_id: generate_object_data(config, env, bases[object_id])
        for object_id in legit_ids
    }
    t_train = config.num_training_windows

    references = {
        object_id: select_reference(windows[object_id][:t_train])
        for object_id in legit_ids
    }
    if len(legit_ids) >= 2:
        histories = {
            object_id: _window_step_history(
                windows[object_id][:t_train], references[object_id]
            )
            for object_id in legit_ids
        }
        graph = build_graph(histories, DEFAULT_BETA_MIN)
    else:
        graph = SimilarityGraph(nodes=tuple(legit_ids), weights={}, beta_min=DEFAULT_BETA_MIN)

    attacker_windows = {
        target: spawn_attacker(config, references[target]) for target in hijacked
    }

    # Calibration on the attacker-free training half.
    train_plain: list[float] = []
    train_env: list[float] = []
    for t in range(t_train):
        submissions = {object_id: windows[object_id][t] for object_id in legit_ids}
        for object_id in legit_ids:
            window = submissions[object_id]
            train_plain.append(plain_distance(window, references[object_id]))
            train_env.append(
                compensated_distance(object_id, window, references, submissions, graph)
            )
    tau_prime = calibrate_threshold(train_plain)
    tau = calibrate_threshold(train_env)

    # Evaluation half: attackers hijack their targets' submissions, so they
    # also poison the neighbor estimates of every legitimate object.
    eval_rows: list[_StreamRow] = []
    for t in range(t_train, config.num_windows):
        submissions = {
            object_id: (
                attacker_windows[object_id][t]
                if object_id in hijacked
                else windows[object_id][t]
            )
            for object_id in legit_ids
        }
        streams: list[tuple[str, str, FingerprintMatrix, bool]] = [
            (object_id, object_id, windows[object_id][t], False)
            for object_id in legit_ids
        ]
        streams += [
            (f"{target}#attacker", target, attacker_windows[target][t], True)
            for target in hijacked
        ]
        for stream, claimed_id, window, is_attacker in streams:
            delta = plain_distance(window, references[claimed_id])
            delta_hat = compensated_distance(
                claimed_id, window, references, submissions, graph
            )
            eval_rows.append(
                _StreamRow(
                    stream=stream,
                    window=t,
                    delta=delta,
                    delta_hat=delta_hat,
                    is_attacker=is_attacker,
                )
            )
    return _ScenarioData(
        config=config,
        legit_ids=tuple(legit_ids),
        hijacked_ids=hijacked,
        tau=tau,
        tau_prime=tau_prime,
        eval_rows=tuple(eval_rows),
    )


def _accuracy(
    legit: np.ndarray, attacker: np.ndarray, tau: float
) -> float:
    correct = int(np.sum(legit <= tau)) + int(np.sum(attacker > tau))
    return correct / (legit.size + attacker.size)


def _sweep_curve(
    data: _ScenarioData, taus: Sequence[float]
) -> list[tuple[float, float, float]]:
    legit_delta = np.array([r.delta for r in data.eval_rows if not r.is_attacker])
    legit_hat = np.array([r.delta_hat for r in data.eval_rows if not r.is_attacker])
    att_delta = np.array([r.delta for r in data.eval_rows if r.is_attacker])
    att_hat = np.array([r.delta_hat for r in data.eval_rows if r.is_attacker])
    curve = []
    for tau in taus:
        curve.append(
            (
                float(tau),
                _accuracy(legit_delta, att_delta, tau),
                _accuracy(legit_hat, att_hat, tau),
            )
        )
    return curve


def _default_tau_grid(data: _ScenarioData, points: int = 64) -> np.ndarray:
    top = max(
        max(row.delta for row in data.eval_rows),
        max(row.delta_hat for row in data.eval_rows),
    )
    top = min(max(top * 1.05, 1e-9), MAX_DISTANCE)
    return np.linspace(0.0, top, points)


@dataclass(frozen=True)
class MetricsReport:
    """All scenario outputs: thresholds, rates, sweep curve, per-window rows."""

    config: ScenarioConfig
    tau: float
    tau_prime: float
    false_positive_rate_base: float
    false_positive_rate_env: float
    detection_rate_base: float | None
    detection_rate_env: float | None
    min_zero_fp_tau_base: float
    min_zero_fp_tau_env: float
    detection_at_zero_fp_base: float | None
    detection_at_zero_fp_env: float | None
    gap_base: float | None
    gap_env: float | None
    per_object_mean_delta: dict[str, float]
    per_object_mean_delta_hat: dict[str, float]
    sweep: list[tuple[float, float, float]]
    per_window: list[dict]
    rng_algorithm: str = RNG_ALGORITHM

    def __post_init__(self):
        rates = [
            self.false_positive_rate_base,
            self.false_positive_rate_env,
            self.detection_rate_base,
            self.detection_rate_env,
            self.detection_at_zero_fp_base,
            self.detection_at_zero_fp_env,
        ]
        for rate in rates:
            if rate is not None and not 0.0 <= rate <= 1.0:
                raise InvalidInput(f"rate outside [0, 1]: {rate}")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "rng_algorithm": self.rng_algorithm,
            "config": self.config.to_dict(),
            "tau": self.tau,
            "tau_prime": self.tau_prime,
            "false_positive_rate": {
                "base": self.false_positive_rate_base,
                "env": self.false_positive_rate_env,
            },
            "detection_rate": {
                "base": self.detection_rate_base,
                "env": self.detection_rate_env,
            },
            "min_zero_fp_tau": {
                "base": self.min_zero_fp_tau_base,
                "env": self.min_zero_fp_tau_env,
            },
            "detection_at_zero_fp": {
                "base": self.detection_at_zero_fp_base,
                "env": self.detection_at_zero_fp_env,
            },
            "gap": {"base": self.gap_base, "env": self.gap_env},
            "per_object_mean_delta": self.per_object_mean_delta,
            "per_object_mean_delta_hat": self.per_object_mean_delta_hat,
            "sweep": [list(point) for point in self.sweep],
            "per_window": self.per_window,
        }


def run_scenario(config: ScenarioConfig) -> MetricsReport:
    """Generate a full scenario and evaluate both authentication pipelines."""
    data = _scenario_data(config)
    legit = [row for row in data.eval_rows if not row.is_attacker]
    attacker = [row for row in data.eval_rows if row.is_attacker]
    legit_delta = np.array([row.delta for row in legit])
    legit_hat = np.array([row.delta_hat for row in legit])
    att_delta = np.array([row.delta for row in attacker])
    att_hat = np.array([row.delta_hat for row in attacker])

    fpr_base = float(np.mean(legit_delta > data.tau_prime))
    fpr_env = float(np.mean(legit_hat > data.tau))
    detection_base = float(np.mean(att_delta > data.tau_prime)) if attacker else None
    detection_env = float(np.mean(att_hat > data.tau)) if attacker else None

    max_legit_base = float(legit_delta.max())
    max_legit_env = float(legit_hat.max())
    det0_base = float(np.mean(att_delta > max_legit_base)) if attacker else None
    det0_env = float(np.mean(att_hat > max_legit_env)) if attacker else None
    gap_base = float(att_delta.mean() - legit_delta.mean()) if attacker else None
    gap_env = float(att_hat.mean() - legit_hat.mean()) if attacker else None

    streams = sorted({row.stream for row in data.eval_rows})
    mean_delta = {}
    mean_delta_hat = {}
    for stream in streams:
        rows = [row for row in data.eval_rows if row.stream == stream]
        mean_delta[stream] = float(np.mean([row.delta for row in rows]))
        mean_delta_hat[stream] = float(np.mean([row.delta_hat for row in rows]))

    per_window = [
        {
            "object_id": row.stream,
            "window": row.window,
            "delta": row.delta,
            "delta_hat": row.delta_hat,
            "verdict_base": (
                Verdict.LEGITIMATE if row.delta <= data.tau_prime else Verdict.ATTACKER
            ).value,
            "verdict_env": (
                Verdict.LEGITIMATE if row.delta_hat <= data.tau else Verdict.ATTACKER
            ).value,
        }
        for row in data.eval_rows
    ]

    return MetricsReport(
        config=config,
        tau=data.tau,
        tau_prime=data.tau_prime,
        false_positive_rate_base=fpr_base,
        false_positive_rate_env=fpr_env,
        detection_rate_base=detection_base,
        detection_rate_env=detection_env,
        min_zero_fp_tau_base=max_legit_base,
        min_zero_fp_tau_env=max_legit_env,
        detection_at_zero_fp_base=det0_base,
        detection_at_zero_fp_env=det0_env,
        gap_base=gap_base,
        gap_env=gap_env,
        per_object_mean_delta=mean_delta,
        per_object_mean_delta_hat=mean_delta_hat,
        sweep=_sweep_curve(data, _default_tau_grid(data)),
        per_window=per_window,
    )


def sweep_threshold(
    config: ScenarioConfig, taus: Sequence[float]
) -> list[tuple[float, float, float]]:
    """Fraction of correct verdicts per threshold, for both pipelines."""
    values = [float(tau) for tau in taus]
    if not values:
        raise InvalidInput("need at least one tau")
    if any(not np.isfinite(tau) or tau < 0 for tau in values):
        raise InvalidInput("taus must be finite and >= 0")
    return _sweep_curve(_scenario_data(config), values)


def write_report(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """Write report.json, distances.csv, and sweep.csv into ``out_dir``."""
    import csv as _csv

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    distances_path = out_dir / "distances.csv"
    with distances_path.open("w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(
            ["object_id", "window", "delta", "delta_hat", "verdict_base", "verdict_env"]
        )
        for row in report.per_window:
            writer.writerow(
                [
                    row["object_id"],
                    row["window"],
                    repr(row["delta"]),
                    repr(row["delta_hat"]),
                    row["verdict_base"],
                    row["verdict_env"],
                ]
            )
    sweep_path = out_dir / "sweep.csv"
    with sweep_path.open("w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["tau", "accuracy_base", "accuracy_env"])
        for tau, acc_base, acc_env in report.sweep:
            writer.writerow([repr(tau), repr(acc_base), repr(acc_env)])
    return [report_path, distances_path, sweep_path]


# ---------------------------------------------------------------------------
# Transfer-learning evaluation across source-relatedness classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferEvalConfig:
    num_target: int = 5
    num_source: int = 15
    num_windows: int = 12
    window_length: int = 16
    feature_dim: int = 3
    env_magnitude: float = 0.5
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(sigma=0.1))
    alphas: tuple[float, ...] = (0.25, 0.5)
    num_seeds: int = 30
    seed: int = 0
    class_noise_multipliers: tuple[float, ...] = DEFAULT_CLASS_NOISE_MULTIPLIERS

    def __post_init__(self):
        checks = [
            (self.num_target < 2, "num_target: must be >= 2"),
            (self.num_source < 1, "num_source: must be >= 1"),
            (self.num_windows < 2, "num_windows: must be >= 2"),
            (self.window_length < 2, "window_length: must be >= 2"),
            (self.feature_dim < 1, "feature_dim: must be >= 1"),
            (
                not np.isfinite(self.env_magnitude) or self.env_magnitude < 0,
                "env_magnitude: must be finite and >= 0",
            ),
            (self.num_seeds < 1, "num_seeds: must be >= 1"),
            (not 0 <= self.seed <= _UINT64_MASK, "seed: must fit in 64 bits"),
            (len(self.alphas) < 1, "alphas: must be non-empty"),
            (
                any(not np.isfinite(a) or a < 0 for a in self.alphas),
                "alphas: must be finite and >= 0",
            ),
            (
                len(self.class_noise_multipliers) < 1
                or any(not np.isfinite(c) or c < 0 for c in self.class_noise_multipliers),
                "class_noise_multipliers: must be finite and >= 0",
            ),
        ]
        for failed, message in checks:
            if failed:
                raise InvalidInput(message)


_TRANSFER_REQUIRED = {"schema_version": int, "seed": int}
_TRANSFER_OPTIONAL = {
    "num_target": int,
    "num_source": int,
    "num_windows": int,
    "window_length": int,
    "feature_dim": int,
    "env_magnitude": (int, float),
    "noise": dict,
    "alphas": list,
    "num_seeds": int,
    "class_noise_multipliers": list,
}


def transfer_eval_config_from_dict(raw: Mapping) -> TransferEvalConfig:
    if not isinstance(raw, Mapping):
        raise InvalidInput("config: must be a JSON object")
    known = set(_TRANSFER_REQUIRED) | set(_TRANSFER_OPTIONAL)
    for name in raw:
        if name not in known:
            raise InvalidInput(f"{name}: unknown field")
    for name, types in _TRANSFER_REQUIRED.items():
        if name not in raw:
            raise InvalidInput(f"{name}: missing required field")
        if not isinstance(raw[name], types) or isinstance(raw[name], bool):
            raise InvalidInput(f"{name}: wrong type")
    for name, types in _TRANSFER_OPTIONAL.items():
        if name in raw and (not isinstance(raw[name], types) or isinstance(raw[name], bool)):
            raise InvalidInput(f"{name}: wrong type")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise InvalidInput(f"schema_version: expected {SCHEMA_VERSION}")
    kwargs = {}
    for name in _TRANSFER_OPTIONAL:
        if name not in raw:
            continue
        if name == "noise":
            for sub in raw["noise"]:
                if sub != "sigma":
                    raise InvalidInput(f"noise.{sub}: unknown field")
            if "sigma" not in raw["noise"]:
                raise InvalidInput("noise.sigma: missing required field")
            kwargs["noise"] = NoiseModel(sigma=float(raw["noise"]["sigma"]))
        elif name in ("alphas", "class_noise_multipliers"):
            values = raw[name]
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                raise InvalidInput(f"{name}: entries must be numbers")
            kwargs[name] = tuple(float(v) for v in values)
        else:
            kwargs[name] = raw[name]
    return TransferEvalConfig(seed=raw["seed"], **kwargs)


def load_transfer_eval_config(path: str | Path) -> TransferEvalConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
    return transfer_eval_config_from_dict(raw)


def _transfer_trial(
    config: TransferEvalConfig, trial: int
) -> tuple[dict[int, dict[float, float]], float]:
    """One seeded trial: mean legitimate corrected distance per (class, alpha),
    plus the class-independent no-transfer mean."""
    m = config.feature_dim
    n = config.window_length
    t_total = config.num_windows
    t_train = t_total // 2
    sigma = config.noise.sigma
    seed = config.seed
    prefix = f"transfer-trial-{trial}"
    names = tuple(f"f{j + 1}" for j in range(m))
    classes = range(1, len(config.class_noise_multipliers) + 1)

    env_rng = _stream(seed, f"{prefix}-environment")
    transforms = _transforms_from_walk(
        _skew_walk(env_rng, t_total, m, config.env_magnitude)
    )

    def make_base(object_id: str) -> ReferenceFingerprint:
        rng = _stream(seed, f"{prefix}-base-{object_id}")
        center = OBJECT_SPREAD * rng.standard_normal(m)
        rows = center + ROW_SPREAD * rng.standard_normal((n, m))
        return ReferenceFingerprint(
            matrix=FingerprintMatrix(
                values=rows, object_id=object_id, window_index=-1, feature_names=names
            )
        )

    target_ids = [f"tgt{i:02d}" for i in range(config.num_target)]
    source_ids = [f"src{i:02d}" for i in range(config.num_source)]
    target_refs = {oid: make_base(oid) for oid in target_ids}
    source_refs = {oid: make_base(oid) for oid in source_ids}

    def clean_windows(ref: ReferenceFingerprint, noise_rng) -> list[np.ndarray]:
        rows = []
        for transform in transforms:
            noise = sigma * noise_rng.standard_normal((n, m))
            rows.append(
                ref.matrix.values @ transform.rotation.T + transform.translation + noise
            )
        return rows

    target_windows = {}
    for oid in target_ids:
        rng = _stream(seed, f"{prefix}-noise-{oid}")
        target_windows[oid] = [
            FingerprintMatrix(values=v, object_id=oid, window_index=t, feature_names=names)
            for t, v in enumerate(clean_windows(target_refs[oid], rng))
        ]

    # Source windows per class: the same clean windows plus class-scaled
    # extra noise drawn once, so relatedness degrades monotonically.
    source_windows: dict[int, dict[str, list[FingerprintMatrix]]] = {
        c: {} for c in classes
    }
    for oid in source_ids:
        rng = _stream(seed, f"{prefix}-noise-{oid}")
        clean = clean_windows(source_refs[oid], rng)
        extra_rng = _stream(seed, f"{prefix}-class-noise-{oid}")
        extras = [extra_rng.standard_normal((n, m)) for _ in range(t_total)]
        for c in classes:
            scale = sigma * config.class_noise_multipliers[c - 1]
            source_windows[c][oid] = [
                FingerprintMatrix(
                    values=clean[t] + scale * extras[t],
                    object_id=oid,
                    window_index=t,
                    feature_names=names,
                )
                for t in range(t_total)
            ]

    histories = {
        oid: _window_step_history(target_windows[oid][:t_train], target_refs[oid])
        for oid in target_ids
    }
    graph = build_graph(histories, DEFAULT_BETA_MIN)

    per_class: dict[int, dict[float, list[float]]] = {
        c: {alpha: [] for alpha in config.alphas} for c in classes
    }
    no_transfer: list[float] = []
    for t in range(t_train, t_total):
        target_transforms = {
            oid: estimate_transform(target_windows[oid][t], target_refs[oid])
            for oid in target_ids
        }
        source_transforms = {
            c: [
                estimate_transform(source_windows[c][oid][t], source_refs[oid])
                for oid in source_ids
            ]
            for c in classes
        }
        for oid in target_ids:
            neighbor_weights = graph.neighbors(oid)
            if neighbor_weights:
                neighbor_ids = [nid for nid, _ in neighbor_weights]
                weights = [w for _, w in neighbor_weights]
            else:
                neighbor_ids = [other for other in target_ids if other != oid]
                weights = [1.0] * len(neighbor_ids)
            tt = [target_transforms[nid] for nid in neighbor_ids]

            def corrected_distance(fused) -> float:
                corrected = correct_reference(target_refs[oid], fused)
                return bhattacharyya_gaussian(
                    summarize(target_windows[oid][t]), summarize(corrected.matrix)
                )

            no_transfer.append(corrected_distance(fuse_transforms(tt, weights)))
            for c in classes:
                st = source_transforms[c]
                sw = [1.0] * len(st)
                for alpha in config.alphas:
                    per_class[c][alpha].append(
                        corrected_distance(joint_fuse(tt, weights, st, sw, alpha))
                    )
    means = {
        c: {alpha: float(np.mean(values)) for alpha, values in by_alpha.items()}
        for c, by_alpha in per_class.items()
    }
    return means, float(np.mean(no_transfer))


def run_transfer_eval(config: TransferEvalConfig) -> list[dict]:
    """Seed-averaged mean legitimate corrected distance per (class, alpha).

    Source objects are trusted with unit weight regardless of their actual
    relatedness (the transfer is forced), which is what makes negative
    transfer observable at the unrelated end of the class range.
    """
    classes = range(1, len(config.class_noise_multipliers) + 1)
    sums = {c: {alpha: 0.0 for alpha in config.alphas} for c in classes}
    baseline_sum = 0.0
    for trial in range(config.num_seeds):
        means, baseline = _transfer_trial(config, trial)
        baseline_sum += baseline
        for c in classes:
            for alpha in config.alphas:
                sums[c][alpha] += means[c][alpha]
    rows = []
    for c in classes:
        row = {
            "class": c,
            "no_transfer": baseline_sum / config.num_seeds,
        }
        for alpha in config.alphas:
            row[f"alpha_{alpha:g}"] = sums[c][alpha] / config.num_seeds
        rows.append(row)
    return rows


def write_transfer_eval(rows: list[dict], out_dir: str | Path) -> Path:
    """Write the per-(class, alpha) table as transfer.csv."""
    import csv as _csv

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "transfer.csv"
    if not rows:
        raise InvalidInput("nothing to write")
    header = list(rows[0].keys())
    with path.open("w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [row["class"], *[repr(float(row[k])) for k in header[1:]]]
            )
    return path
