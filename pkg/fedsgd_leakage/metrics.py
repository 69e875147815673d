"""
Scoring of reconstructions against the client's true batch.

Tabular inputs count as recovered when the Euclidean distance to their
matched reconstruction is below 0.1; image-like inputs when the SSIM is at
least 0.99. Matching is one-to-one.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.ndimage
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .exceptions import ValidationError
from .model import Batch
from .utils import ValidationUtils

logger = logging.getLogger(__name__)

L2_THRESHOLD = 0.1
SSIM_THRESHOLD = 0.99
SSIM_WINDOW_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DYNAMIC_RANGE = 1.0

MODALITIES = ("tabular", "image")


@dataclass
class RecoveryStats:
    """Outcome of matching recovered inputs to the true batch."""

    n_true: int
    n_recovered_exact: int
    fraction: float
    per_sample_error: List[float] = field(default_factory=list)
    unmatched_recovered: int = 0
    rounds_used: int = 0
    wall_time_seconds: float = 0.0
    labels_checked: int = 0
    labels_correct: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValidationError(f"fraction must lie in [0, 1], got {self.fraction}")
        if self.n_recovered_exact > self.n_true:
            raise ValidationError("n_recovered_exact cannot exceed n_true")

    @property
    def label_accuracy(self) -> Optional[float]:
        if not self.labels_checked:
            return None
        return self.labels_correct / self.labels_checked

    def max_error(self) -> Optional[float]:
        finite = [e for e in self.per_sample_error if math.isfinite(e)]
        return max(finite) if finite else None

    def to_dict(self) -> dict:
        return asdict(self)


def gaussian_window(size: int = SSIM_WINDOW_SIZE, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian kernel."""
    half = (size - 1) / 2.0
    y, x = np.ogrid[-half:half + 1, -half:half + 1]
    kernel = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _as_image(values: np.ndarray, height: int, width: int, channels: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.size != height * width * channels:
        raise ValidationError(
            f"Image of {values.size} values does not fit {height}x{width}x{channels}"
        )
    return values.reshape(height, width, channels)


def ssim(a: np.ndarray, b: np.ndarray, height: int, width: int, channels: int = 1) -> float:
    """
    Mean structural similarity of two images stored in HWC order.

    Uses an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 and a
    dynamic range of 1.0, averaged over pixels and channels.

    Raises:
        ValidationError: If the shapes differ or do not fit the geometry
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    img1 = _as_image(a, height, width, channels)
    img2 = _as_image(b, height, width, channels)

    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2
    window = gaussian_window()

    scores = []
    for channel in range(channels):
        x = img1[:, :, channel]
        y = img2[:, :, channel]
        mu1 = scipy.ndimage.correlate(x, window, mode="reflect")
        mu2 = scipy.ndimage.correlate(y, window, mode="reflect")
        mu1_mu2 = mu1 * mu2
        sigma1_sq = scipy.ndimage.correlate(x * x, window, mode="reflect") - mu1 * mu1
        sigma2_sq = scipy.ndimage.correlate(y * y, window, mode="reflect") - mu2 * mu2
        sigma12 = scipy.ndimage.correlate(x * y, window, mode="reflect") - mu1_mu2

        ssim_map = ((2.0 * mu1_mu2 + c1) * (2.0 * sigma12 + c2)) / \
            ((mu1 * mu1 + mu2 * mu2 + c1) * (sigma1_sq + sigma2_sq + c2))
        scores.append(float(np.mean(ssim_map)))
    return float(sum(scores) / channels)


def _cost_matrix(truth: np.ndarray, recovered: np.ndarray, modality: str, image_shape) -> np.ndarray:
    """Lower is better: L2 distance, or minus SSIM."""
    if modality == "tabular":
        return cdist(truth, recovered, "euclidean")
    height, width, channels = image_shape
    cost = np.empty((truth.shape[0], recovered.shape[0]))
    for i in range(truth.shape[0]):
        for j in range(recovered.shape[0]):
            cost[i, j] = -ssim(truth[i], recovered[j], height, width, channels)
    return cost


def _greedy_pairs(cost: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> List[Tuple[int, int]]:
    """Repeatedly take the globally cheapest (row, col) among unused rows and columns."""
    if rows.size == 0 or cols.size == 0:
        return []
    sub = cost[np.ix_(rows, cols)]
    order = np.argsort(sub, axis=None, kind="stable")
    used_rows, used_cols, pairs = set(), set(), []
    limit = min(rows.size, cols.size)
    for flat in order:
        r, c = divmod(int(flat), cols.size)
        if r in used_rows or c in used_cols:
            continue
        used_rows.add(r)
        used_cols.add(c)
        pairs.append((int(rows[r]), int(cols[c])))
        if len(pairs) == limit:
            break
    return pairs


def _greedy_match(cost: np.ndarray, passing: np.ndarray) -> List[Tuple[int, int]]:
    # Passing pairs sort ahead of all failing ones, so match them first on
    # their own and only sort the leftover block in full.
    candidates = np.argwhere(passing)
    keyed = sorted(((cost[i, j], i, j) for i, j in candidates))
    used_rows, used_cols, pairs = set(), set(), []
    for _, i, j in keyed:
        if i in used_rows or j in used_cols:
            continue
        used_rows.add(int(i))
        used_cols.add(int(j))
        pairs.append((int(i), int(j)))

    rows = np.array([i for i in range(cost.shape[0]) if i not in used_rows], dtype=np.int64)
    cols = np.array([j for j in range(cost.shape[1]) if j not in used_cols], dtype=np.int64)
    return pairs + _greedy_pairs(cost, rows, cols)


def match_reconstructions(
    truth: Union[Batch, np.ndarray],
    recovered: np.ndarray,
    modality: str = "tabular",
    image_shape: Optional[Tuple[int, int, int]] = None,
    recovered_labels: Optional[Sequence[Optional[int]]] = None,
    optimal: bool = False,
    rounds_used: int = 0,
    wall_time_seconds: float = 0.0
) -> RecoveryStats:
    """
    Pair recovered inputs with true ones and count exact recoveries.

    Args:
        truth: True batch (labels are used for label accuracy) or array
        recovered: Recovered inputs, one per row
        modality: "tabular" (L2 < 0.1) or "image" (SSIM >= 0.99)
        image_shape: (height, width, channels) for image modality
        recovered_labels: Inferred labels aligned with ``recovered``
        optimal: Use a minimum-cost assignment instead of greedy matching
        rounds_used: Copied into the stats
        wall_time_seconds: Copied into the stats

    Returns:
        RecoveryStats; per_sample_error holds the matched score of each true
        input (L2 distance or SSIM), inf/nan-free only for matched inputs
    """
    ValidationUtils.validate_choice(modality, MODALITIES, "modality")
    truth_labels = truth.labels if isinstance(truth, Batch) else None
    truth_inputs = truth.inputs if isinstance(truth, Batch) else np.asarray(truth)
    truth_inputs = np.atleast_2d(np.asarray(truth_inputs, dtype=np.float64))
    n_true = truth_inputs.shape[0]
    recovered = np.asarray(recovered, dtype=np.float64).reshape(-1, truth_inputs.shape[1]) \
        if np.asarray(recovered).size else np.zeros((0, truth_inputs.shape[1]))
    if modality == "image" and image_shape is None:
        raise ValidationError("image modality requires image_shape")

    if recovered.shape[0] == 0:
        default = math.inf if modality == "tabular" else -math.inf
        return RecoveryStats(n_true, 0, 0.0, [default] * n_true, 0, rounds_used, wall_time_seconds)

    cost = _cost_matrix(truth_inputs, recovered, modality, image_shape)
    if modality == "tabular":
        passing = cost < L2_THRESHOLD
    else:
        passing = -cost >= SSIM_THRESHOLD

    if optimal:
        rows, cols = linear_sum_assignment(cost)
        pairs = list(zip(rows.tolist(), cols.tolist()))
    else:
        pairs = _greedy_match(cost, passing)

    errors = [math.inf if modality == "tabular" else -math.inf] * n_true
    recovered_exact = 0
    labels_checked = labels_correct = 0
    for i, j in pairs:
        errors[i] = float(cost[i, j]) if modality == "tabular" else float(-cost[i, j])
        if passing[i, j]:
            recovered_exact += 1
            if truth_labels is not None and recovered_labels is not None and recovered_labels[j] is not None:
                labels_checked += 1
                labels_correct += int(recovered_labels[j] == truth_labels[i])

    stats = RecoveryStats(
        n_true=n_true,
        n_recovered_exact=recovered_exact,
        fraction=recovered_exact / n_true,
        per_sample_error=errors,
        unmatched_recovered=recovered.shape[0] - len(pairs),
        rounds_used=rounds_used,
        wall_time_seconds=wall_time_seconds,
        labels_checked=labels_checked,
        labels_correct=labels_correct,
    )
    logger.debug(f"Matched {recovered_exact}/{n_true} inputs ({modality}), "
                 f"{stats.unmatched_recovered} recovered vectors unmatched")
    return stats
