"""
Seeded random generation and small dense kernels.

Dense matrices and vectors are plain numpy arrays. The reductions here use a
fixed left-to-right accumulation over the inner dimension, so a result only
depends on its inputs and never on BLAS threading or blocking.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from .exceptions import ValidationError
from .utils import ValidationUtils

logger = logging.getLogger(__name__)

PRECISIONS = {
    "float64": np.float64,
    "float32": np.float32,
}

_SEED_MASK = (1 << 64) - 1


def resolve_dtype(precision: str) -> type:
    """
    Map a precision name to a numpy dtype.

    Args:
        precision: "float64" (default for every run) or "float32"

    Returns:
        The numpy scalar type

    Raises:
        ValidationError: If the name is unknown
    """
    ValidationUtils.validate_choice(precision, tuple(PRECISIONS), "precision")
    return PRECISIONS[precision]


class SeededRng:
    """
    Deterministic random stream keyed by a 64-bit seed.

    ``derive`` mixes extra integer keys (round index, stream id, client index)
    into the seed material, so independent consumers never share state and a
    stream is reproducible from (seed, keys) alone.
    """

    def __init__(self, seed: int, keys: Tuple[int, ...] = ()):
        self.seed = int(seed)
        self.keys = tuple(int(k) for k in keys)
        material = [self.seed & _SEED_MASK] + [k & _SEED_MASK for k in self.keys]
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(material)))

    def derive(self, *keys: int) -> "SeededRng":
        """Return an independent stream for the given sub-keys."""
        return SeededRng(self.seed, self.keys + tuple(keys))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def normal(self, mean: float, std: float, size) -> np.ndarray:
        return self._generator.normal(mean, std, size)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size) -> np.ndarray:
        return self._generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, keys={self.keys})"


def _result_dtype(*arrays: np.ndarray):
    return np.result_type(*arrays, np.float32)


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Matrix-vector product with fixed summation order.

    result[i] = sum_j m[i, j] * v[j], accumulated for j = 0, 1, ... in turn.

    Args:
        m: Matrix of shape (rows, cols)
        v: Vector of length cols

    Returns:
        Vector of length rows

    Raises:
        ValidationError: If the shapes do not chain
    """
    m = np.asarray(m)
    v = np.asarray(v)
    if m.ndim != 2 or v.ndim != 1:
        raise ValidationError(f"matvec expects a matrix and a vector, got shapes {m.shape} and {v.shape}")
    ValidationUtils.validate_dimension_match(m.shape[1], v.shape[0], "matvec inner dimension")

    out = np.zeros(m.shape[0], dtype=_result_dtype(m, v))
    for j in range(m.shape[1]):
        out += m[:, j] * v[j]
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Matrix product with fixed summation order over the inner dimension.

    Each entry equals the naive loop sum_k a[i, k] * b[k, j] accumulated for
    k = 0, 1, ... in turn, which keeps every row identical to ``matvec``.

    Raises:
        ValidationError: If the shapes do not chain
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValidationError(f"matmul expects two matrices, got shapes {a.shape} and {b.shape}")
    ValidationUtils.validate_dimension_match(a.shape[1], b.shape[0], "matmul inner dimension")

    out = np.zeros((a.shape[0], b.shape[1]), dtype=_result_dtype(a, b))
    for k in range(a.shape[1]):
        out += a[:, k, None] * b[None, k, :]
    return out


def column_sum(m: np.ndarray) -> np.ndarray:
    """Sum the rows of ``m`` in index order."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValidationError(f"column_sum expects a matrix, got shape {m.shape}")
    out = np.zeros(m.shape[1], dtype=_result_dtype(m))
    for i in range(m.shape[0]):
        out += m[i]
    return out


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    """
    Softmax with max-subtraction.

    Accepts a single logit vector or a matrix with one logit vector per row.
    Logits as large as 1e25 are fine because only differences are
    exponentiated.

    Raises:
        ValidationError: If the input is empty or not finite
    """
    logits = np.asarray(logits)
    if logits.size == 0:
        raise ValidationError("stable_softmax requires a non-empty logit vector")
    if not np.all(np.isfinite(logits)):
        raise ValidationError("stable_softmax requires finite logits")

    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Log of ``stable_softmax`` computed without forming the probabilities."""
    logits = np.asarray(logits)
    if logits.size == 0:
        raise ValidationError("log_softmax requires a non-empty logit vector")
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def gaussian_sample(
    rng: SeededRng,
    n: int,
    mean: float = 0.0,
    std: float = 1.0,
    dtype: Optional[type] = None
) -> np.ndarray:
    """
    Draw ``n`` i.i.d. normal values.

    Args:
        rng: Stream to draw from (advanced by this call)
        n: Number of draws
        mean: Distribution mean
        std: Standard deviation; 0 returns a constant vector of ``mean``
        dtype: Output dtype, float64 when omitted

    Returns:
        Vector of length n

    Raises:
        ValidationError: If std is negative
    """
    if std < 0:
        raise ValidationError(f"std must be non-negative, got {std}")
    dtype = dtype or np.float64
    if std == 0:
        return np.full(n, mean, dtype=dtype)
    return rng.normal(mean, std, n).astype(dtype, copy=False)
