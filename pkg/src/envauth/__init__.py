"""Device authentication from statistical fingerprints with environment
estimation, plus a synthetic scenario simulator and CLI."""

__version__ = "0.1.0"

from .distance import (
    MAX_DISTANCE,
    AuthDecision,
    Verdict,
    authenticate,
    bhattacharyya_empirical,
    bhattacharyya_gaussian,
    calibrate_threshold,
)
from .environment import (
    CorrectedReference,
    EnvironmentTransform,
    authenticate_with_env,
    correct_reference,
    estimate_transform,
    fuse_transforms,
    multi_stage_filter,
)
from .errors import (
    EnvAuthError,
    InvalidInput,
    NoNeighbors,
    NotFound,
    NumericalError,
    UnsupportedDimension,
    UnsupportedTransfer,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    SignalRecording,
    extract_features,
    max_cross_correlation,
    shannon_entropy,
)
from .fingerprint import (
    FingerprintMatrix,
    GaussianSummary,
    ReferenceFingerprint,
    build_matrix,
    select_reference,
    summarize,
)
from .graph import SimilarityGraph, build_graph
from .simulate import (
    AttackerKind,
    MetricsReport,
    NoiseModel,
    ScenarioConfig,
    generate_environment,
    generate_object_data,
    run_scenario,
    spawn_attacker,
    sweep_threshold,
)
from .transfer import (
    TransferConfig,
    estimate_source_transforms,
    joint_fuse,
    transfer_threshold,
)
