"""Higher-order statistical features extracted from raw signal recordings.

Each recording is reduced to seven scalar features, in this fixed order:
mean, variance, Shannon entropy, second central moment, skewness, kurtosis,
and maximum cross-correlation against the object's training-time template.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput

FEATURE_NAMES = (
    "mean",
    "variance",
    "shannon_entropy",
    "second_central_moment",
    "skewness",
    "kurtosis",
    "max_cross_correlation",
)

DEFAULT_ENTROPY_BINS = 256


@dataclass(frozen=True, eq=False)
class SignalRecording:
    """A 1-D amplitude recording. ``sample_rate`` is metadata only."""

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidInput("empty signal")
        if samples.size < 2:
            raise InvalidInput("signal needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise InvalidInput("signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One observation of an object: m feature values plus their labels."""

    values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InvalidInput("feature vector must be 1-D and non-empty")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("feature vector contains non-finite values")
        names = tuple(self.feature_names)
        if len(names) != values.size:
            raise InvalidInput("feature_names length does not match values")
        if len(set(names)) != len(names):
            raise InvalidInput("feature names must be unique")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", names)

    @property
    def dimension(self) -> int:
        return int(self.values.size)


def shannon_entropy(signal: SignalRecording, num_bins: int = DEFAULT_ENTROPY_BINS) -> float:
    """Shannon entropy, in bits, of the equal-width histogram of the samples.

    The histogram spans ``[min(samples), max(samples)]`` with ``num_bins``
    bins; empty bins contribute nothing. A constant signal occupies a single
    bin and has entropy 0. The result lies in ``[0, log2(num_bins)]``.
    """
    if num_bins < 1:
        raise InvalidInput("num_bins must be >= 1")
    x = signal.samples
    lo = float(np.min(x))
    hi = float(np.max(x))
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(x, bins=num_bins, range=(lo, hi))
    probs = counts[counts > 0] / x.size
    return float(-np.sum(probs * np.log2(probs)))


def max_cross_correlation(signal: SignalRecording, template: SignalRecording) -> float:
    """Maximum over all integer lags of the normalized cross-correlation.

    Both signals are mean-removed, zero-padded to a common length, and
    compared by circular cross-correlation normalized by the product of
    their norms, so the result lies in [-1, 1]. Identical signals give 1.0;
    a signal whose variance is zero on either side gives 0.0 by convention.
    """
    x = signal.samples - np.mean(signal.samples)
    y = template.samples - np.mean(template.samples)
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    n = max(x.size, y.size)
    fx = np.fft.rfft(x, n)
    fy = np.fft.rfft(y, n)
    corr = np.fft.irfft(fx * np.conj(fy), n) / (nx * ny)
    return float(np.clip(corr, -1.0, 1.0).max())


def extract_features(
    signal: SignalRecording,
    template: SignalRecording,
    entropy_bins: int = DEFAULT_ENTROPY_BINS,
) -> FeatureVector:
    """Compute the seven statistical features of ``signal``.

    ``template`` is the training-time recording of the claimed object and
    only feeds the cross-correlation feature. Variance and the central
    moments use the population (1/n) normalization; skewness and kurtosis
    are the standardized third and fourth central moments (kurtosis is
    non-excess). Zero-variance signals get skewness = kurtosis = 0 so the
    downstream covariance math stays finite.
    """
    x = signal.samples
    mean = float(np.mean(x))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    if m2 > 0.0:
        m3 = float(np.mean(centered**3))
        m4 = float(np.mean(centered**4))
        skewness = m3 / m2**1.5
        kurtosis = m4 / m2**2
    else:
        skewness = 0.0
        kurtosis = 0.0
    values = np.array(
        [
            mean,
            m2,
            shannon_entropy(signal, entropy_bins),
            m2,
            skewness,
            kurtosis,
            max_cross_correlation(signal, template),
        ]
    )
    return FeatureVector(values=values, feature_names=FEATURE_NAMES)


def read_signal_csv(path: str | Path, sample_rate: float = 1.0) -> SignalRecording:
    """Read a recording from CSV: header line ``sample``, one value per line."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInput("empty signal")
    header = [cell.strip() for cell in rows[0]]
    if header != ["sample"]:
        raise InvalidInput(f"{path}: expected header 'sample', got {rows[0]!r}")
    samples = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            samples.append(float(row[0]))
        except ValueError as exc:
            raise InvalidInput(f"{path}:{lineno}: not a number: {row[0]!r}") from exc
    if not samples:
        raise InvalidInput("empty signal")
    return SignalRecording(samples=np.array(samples), sample_rate=sample_rate)


def write_signal_csv(signal: SignalRecording, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample"])
        for value in signal.samples:
            writer.writerow([repr(float(value))])


def read_signal_binary(path: str | Path, sample_rate: float = 1.0) -> SignalRecording:
    """Read the binary format: little-endian u64 length, then f64 samples."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise InvalidInput("empty signal")
    (count,) = struct.unpack("<Q", raw[:8])
    expected = 8 + 8 * count
    if len(raw) != expected:
        raise InvalidInput(f"binary signal length mismatch: header says {count} samples")
    samples = np.frombuffer(raw, dtype="<f8", count=count, offset=8)
    if samples.size == 0:
        raise InvalidInput("empty signal")
    return SignalRecording(samples=samples.copy(), sample_rate=sample_rate)


def write_signal_binary(signal: SignalRecording, path: str | Path) -> None:
    data = struct.pack("<Q", len(signal)) + signal.samples.astype("<f8").tobytes()
    Path(path).write_bytes(data)
