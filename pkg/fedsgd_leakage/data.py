"""
Batch construction: synthetic point clouds, CSV ingestion with feature
scaling, the raw "HRT1" tensor format, and non-IID class partitioning.

Raw tensor layout: magic bytes ``HRT1``, little-endian u32 n, u32 d, then
n * d little-endian float64 values in row-major order.
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from .exceptions import ConfigurationError, DataFormatError, ValidationError
from .model import Batch
from .numerics import SeededRng
from .utils import ValidationUtils

logger = logging.getLogger(__name__)

DISTRIBUTIONS = ("ball", "cube", "gauss")
SCALINGS = ("minus1to1", "zero1", "none")
SOURCES = ("synthetic", "csv", "tensor")
HETEROGENEITY = ("iid", "class_partition")

TENSOR_MAGIC = b"HRT1"
TENSOR_HEADER_BYTES = 12
GAUSS_CLIP = 6.0

PARTITION_STREAM = 11
SAMPLE_STREAM = 12

_SCALING_RANGES = {
    "minus1to1": (-1.0, 1.0),
    "zero1": (0.0, 1.0),
}


@dataclass
class FeatureBounds:
    """Per-feature [lo, hi] box the attacker may assume about the data."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        self.lows = np.asarray(self.lows, dtype=np.float64)
        self.highs = np.asarray(self.highs, dtype=np.float64)
        ValidationUtils.validate_finite_array(self.lows, "bounds lows", ndim=1)
        ValidationUtils.validate_finite_array(self.highs, "bounds highs", ndim=1)
        ValidationUtils.validate_dimension_match(self.lows.shape[0], self.highs.shape[0], "bounds")
        if np.any(self.lows >= self.highs):
            raise ValidationError("Every feature bound needs lo < hi")

    @classmethod
    def uniform(cls, low: float, high: float, dimension: int) -> "FeatureBounds":
        return cls(np.full(dimension, low), np.full(dimension, high))

    @classmethod
    def from_data(cls, inputs: np.ndarray) -> "FeatureBounds":
        """Tightest box around ``inputs``; constant features are widened by 0.5."""
        lows = inputs.min(axis=0).astype(np.float64)
        highs = inputs.max(axis=0).astype(np.float64)
        flat = lows >= highs
        lows[flat] -= 0.5
        highs[flat] += 0.5
        return cls(lows, highs)

    @property
    def dimension(self) -> int:
        return self.lows.shape[0]

    def contains(self, inputs: np.ndarray) -> bool:
        inputs = np.atleast_2d(inputs)
        return bool(np.all(inputs >= self.lows) and np.all(inputs <= self.highs))


@dataclass
class DatasetSpec:
    """Where a client's data comes from and how it is split."""

    source: str = "synthetic"
    distribution: str = "gauss"
    n: int = 256
    dimension: int = 64
    class_count: int = 10
    seed: int = 0
    path: Optional[str] = None
    label_column: str = "label"
    scaling: str = "minus1to1"
    label_path: Optional[str] = None
    heterogeneity: str = "iid"
    classes_per_client: Optional[int] = None
    client_index: int = 0

    def validate(self) -> list:
        """Return a list of (field, message) problems; empty when valid."""
        errors = []
        if self.source not in SOURCES:
            errors.append(("source", f"must be one of {list(SOURCES)}"))
        if self.source == "synthetic":
            if self.distribution not in DISTRIBUTIONS:
                errors.append(("distribution", f"must be one of {list(DISTRIBUTIONS)}"))
            if self.n < 1:
                errors.append(("n", "must be >= 1"))
            if self.dimension < 1:
                errors.append(("dimension", "must be >= 1"))
        elif not self.path:
            errors.append(("path", f"required for source {self.source!r}"))
        if self.scaling not in SCALINGS:
            errors.append(("scaling", f"must be one of {list(SCALINGS)}"))
        if self.class_count < 2:
            errors.append(("class_count", "must be >= 2"))
        if self.heterogeneity not in HETEROGENEITY:
            errors.append(("heterogeneity", f"must be one of {list(HETEROGENEITY)}"))
        if self.heterogeneity == "class_partition":
            if not self.classes_per_client or self.classes_per_client < 1:
                errors.append(("classes_per_client", "required and >= 1 for class_partition"))
            elif self.source == "synthetic" and self.classes_per_client > self.class_count:
                errors.append(("classes_per_client", "cannot exceed class_count"))
        return errors


def gen_synthetic(dist: str, n: int, d: int, class_count: int, seed: int) -> Tuple[Batch, FeatureBounds]:
    """
    Draw a synthetic batch.

    Args:
        dist: "ball" (uniform in the unit d-ball), "cube" (uniform in
            [0, 1]^d) or "gauss" (standard normal, clipped to +/-6)
        n: Number of samples
        d: Dimension
        class_count: Labels are uniform over [0, class_count)
        seed: Generation seed

    Returns:
        (batch, bounds) with bounds set to the distribution's support
    """
    ValidationUtils.validate_choice(dist, DISTRIBUTIONS, "distribution")
    ValidationUtils.validate_positive_int(n, "n")
    ValidationUtils.validate_positive_int(d, "d")
    ValidationUtils.validate_positive_int(class_count, "class_count")

    rng = SeededRng(seed)
    if dist == "ball":
        directions = rng.normal(0.0, 1.0, (n, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = rng.uniform(0.0, 1.0, n) ** (1.0 / d)
        inputs = directions * radii[:, None]
        bounds = FeatureBounds.uniform(-1.0, 1.0, d)
    elif dist == "cube":
        inputs = rng.uniform(0.0, 1.0, (n, d))
        bounds = FeatureBounds.uniform(0.0, 1.0, d)
    else:
        inputs = np.clip(rng.normal(0.0, 1.0, (n, d)), -GAUSS_CLIP, GAUSS_CLIP)
        bounds = FeatureBounds.uniform(-GAUSS_CLIP, GAUSS_CLIP, d)

    labels = rng.integers(0, class_count, n)
    return Batch(inputs, labels, class_count), bounds


class FeatureScaler:
    """Per-feature affine scaling fitted on the data it is applied to."""

    def __init__(self, scaling: str = "minus1to1"):
        ValidationUtils.validate_choice(scaling, SCALINGS, "scaling")
        self.scaling = scaling
        self.mins: Optional[np.ndarray] = None
        self.maxs: Optional[np.ndarray] = None

    @property
    def target_range(self) -> Optional[Tuple[float, float]]:
        return _SCALING_RANGES.get(self.scaling)

    def fit(self, inputs: np.ndarray) -> "FeatureScaler":
        self.mins = inputs.min(axis=0).astype(np.float64)
        self.maxs = inputs.max(axis=0).astype(np.float64)
        return self

    def transform(self, inputs: np.ndarray) -> np.ndarray:
        """Map each column to the target range; constant columns go to its midpoint."""
        if self.target_range is None:
            return inputs.astype(np.float64)
        self._require_fit()
        lo, hi = self.target_range
        span = self.maxs - self.mins
        flat = span == 0
        safe = np.where(flat, 1.0, span)
        scaled = lo + (inputs - self.mins) / safe * (hi - lo)
        scaled[:, flat] = 0.5 * (lo + hi)
        return np.clip(scaled, lo, hi)

    def inverse_transform(self, scaled: np.ndarray) -> np.ndarray:
        if self.target_range is None:
            return scaled.astype(np.float64)
        self._require_fit()
        lo, hi = self.target_range
        span = self.maxs - self.mins
        return self.mins + (scaled - lo) / (hi - lo) * span

    def bounds(self, dimension: int) -> FeatureBounds:
        if self.target_range is None:
            self._require_fit()
            return FeatureBounds.from_data(np.vstack([self.mins, self.maxs]))
        return FeatureBounds.uniform(self.target_range[0], self.target_range[1], dimension)

    def _require_fit(self):
        if self.mins is None:
            raise ValidationError("FeatureScaler must be fitted before use")


def _read_frame(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise DataFormatError(f"CSV file not found: {path}")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"Cannot parse CSV {path}: {e}") from e


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    values = pd.to_numeric(raw, errors="coerce")
    bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=np.float64, na_value=np.nan))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        # header is line 1, first data row is line 2
        raise DataFormatError(
            f"Non-numeric value {raw.iloc[row]!r} at row {row + 2}, column {column!r}"
        )
    return values.to_numpy(dtype=np.float64)


def load_csv(path: str, label_column: str = "label", scaling: str = "minus1to1") -> Tuple[Batch, FeatureBounds]:
    """
    Load a comma-separated file with a header row.

    Args:
        path: CSV path
        label_column: Name of the integer-coded label column
        scaling: "minus1to1", "zero1" or "none"

    Returns:
        (batch, bounds); bounds are the target range for scaled data

    Raises:
        DataFormatError: On unreadable files or non-numeric cells (with row
            and column)
        ConfigurationError: If the label column is missing
    """
    ValidationUtils.validate_choice(scaling, SCALINGS, "scaling")
    frame = _read_frame(path)
    if label_column not in frame.columns:
        raise ConfigurationError(
            f"Label column {label_column!r} not found in {path}",
            [("label_column", f"missing from header {list(frame.columns)}")]
        )
    if len(frame) == 0:
        raise DataFormatError(f"CSV file has no data rows: {path}")

    feature_columns = [c for c in frame.columns if c != label_column]
    if not feature_columns:
        raise DataFormatError(f"CSV file has no feature columns: {path}")

    labels_raw = _numeric_column(frame, label_column)
    if np.any(labels_raw != np.round(labels_raw)) or np.any(labels_raw < 0):
        raise DataFormatError(f"Label column {label_column!r} must hold non-negative integers")
    labels = labels_raw.astype(np.int64)

    inputs = np.column_stack([_numeric_column(frame, c) for c in feature_columns])
    scaler = FeatureScaler(scaling).fit(inputs)
    scaled = scaler.transform(inputs)
    class_count = max(int(labels.max()) + 1, 2)

    logger.info(f"Loaded {scaled.shape[0]} rows x {scaled.shape[1]} features from {path} (scaling={scaling})")
    return Batch(scaled, labels, class_count), scaler.bounds(scaled.shape[1])


def write_csv(path: str, batch: Batch, label_column: str = "label"):
    """Write a batch as CSV with columns f0..f{d-1} followed by the label."""
    frame = pd.DataFrame(batch.inputs, columns=[f"f{j}" for j in range(batch.dimension)])
    frame[label_column] = batch.labels
    frame.to_csv(path, index=False)


def write_tensor(path: str, inputs: np.ndarray):
    """Write an (n, d) array in the raw tensor format."""
    inputs = np.ascontiguousarray(inputs, dtype="<f8")
    if inputs.ndim != 2:
        raise ValidationError(f"write_tensor expects a 2-D array, got shape {inputs.shape}")
    header = TENSOR_MAGIC + np.array(inputs.shape, dtype="<u4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(inputs.tobytes())


def load_tensor(path: str, label_path: Optional[str] = None, class_count: Optional[int] = None) -> Tuple[Batch, FeatureBounds]:
    """
    Load a raw tensor file.

    Args:
        path: File in the raw tensor format
        label_path: Optional text file with one integer label per line;
            labels default to class 0
        class_count: Number of classes; inferred from the labels when omitted

    Returns:
        (batch, bounds). Bounds are [0, 1] when all values lie there,
        otherwise the data's own box

    Raises:
        DataFormatError: On a bad magic, truncated or oversized payload
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise DataFormatError(f"Cannot read tensor file {path}: {e}") from e

    if len(blob) < TENSOR_HEADER_BYTES or blob[:4] != TENSOR_MAGIC:
        raise DataFormatError(f"Bad magic in tensor file {path}")
    n, d = (int(v) for v in np.frombuffer(blob, dtype="<u4", count=2, offset=4))
    expected = TENSOR_HEADER_BYTES + 8 * n * d
    if len(blob) != expected:
        raise DataFormatError(
            f"Tensor payload size mismatch in {path}: header says {n}x{d} "
            f"({expected} bytes), file has {len(blob)} bytes"
        )
    if n == 0 or d == 0:
        raise DataFormatError(f"Tensor file {path} holds no samples")

    inputs = np.frombuffer(blob, dtype="<f8", offset=TENSOR_HEADER_BYTES).reshape(n, d).astype(np.float64)
    if not np.all(np.isfinite(inputs)):
        raise DataFormatError(f"Tensor file {path} contains non-finite values")

    if label_path:
        try:
            labels = np.loadtxt(label_path, dtype=np.int64, ndmin=1)
        except (OSError, ValueError) as e:
            raise DataFormatError(f"Cannot read labels {label_path}: {e}") from e
        if labels.shape[0] != n:
            raise DataFormatError(f"Label file {label_path} has {labels.shape[0]} entries, expected {n}")
    else:
        labels = np.zeros(n, dtype=np.int64)
    class_count = class_count or max(int(labels.max()) + 1, 2)

    if np.all(inputs >= 0.0) and np.all(inputs <= 1.0):
        bounds = FeatureBounds.uniform(0.0, 1.0, d)
    else:
        logger.warning(f"Tensor {path} has values outside [0, 1]; using the data range as bounds")
        bounds = FeatureBounds.from_data(inputs)
    return Batch(inputs, labels, class_count), bounds


def partition_non_iid(batch: Batch, classes_per_client: int, seed: int, client_index: int = 0) -> Batch:
    """
    Restrict a batch to the classes owned by one client.

    The classes are shuffled once per ``seed`` and dealt out in consecutive
    slices of ``classes_per_client``, so clients with different indices never
    share a label. Sample order within the kept classes is preserved.

    Raises:
        ConfigurationError: If the client has no slice of classes or none of
            its classes has samples
    """
    C = batch.class_count
    if classes_per_client < 1 or classes_per_client > C:
        raise ConfigurationError(
            "Invalid class partition",
            [("classes_per_client", f"must lie in [1, {C}], got {classes_per_client}")]
        )
    start = client_index * classes_per_client
    if start + classes_per_client > C:
        raise ConfigurationError(
            "Invalid class partition",
            [("client_index", f"client {client_index} needs classes [{start}, {start + classes_per_client}) of {C}")]
        )

    order = SeededRng(seed).derive(PARTITION_STREAM).permutation(C)
    chosen = np.sort(order[start:start + classes_per_client])
    indices = np.flatnonzero(np.isin(batch.labels, chosen))
    if indices.size == 0:
        raise ConfigurationError(
            "Invalid class partition",
            [("classes_per_client", f"no samples in classes {chosen.tolist()}")]
        )
    return batch.subset(indices)


def sample_batch(batch: Batch, n: int, seed: int) -> Batch:
    """Draw ``n`` distinct samples in a seed-fixed order."""
    if n > batch.size:
        raise ConfigurationError(
            "Batch size exceeds dataset",
            [("n", f"{n} requested, {batch.size} available")]
        )
    if n == batch.size:
        return batch
    order = SeededRng(seed).derive(SAMPLE_STREAM).permutation(batch.size)
    return batch.subset(np.sort(order[:n]))


def load_dataset(spec: DatasetSpec) -> Tuple[Batch, FeatureBounds]:
    """Build the client's data from a DatasetSpec, applying the class partition."""
    errors = spec.validate()
    if errors:
        raise ConfigurationError("Invalid dataset specification", errors)

    if spec.source == "synthetic":
        batch, bounds = gen_synthetic(spec.distribution, spec.n, spec.dimension, spec.class_count, spec.seed)
    elif spec.source == "csv":
        batch, bounds = load_csv(spec.path, spec.label_column, spec.scaling)
    else:
        batch, bounds = load_tensor(spec.path, spec.label_path)

    if spec.heterogeneity == "class_partition":
        batch = partition_non_iid(batch, spec.classes_per_client, spec.seed, spec.client_index)
    return batch, bounds
