"""
Trap-weights baseline.

Each first-layer row puts negative weights on a random half of the
coordinates and smaller positive weights on the rest, hoping that some
neuron is activated by exactly one input of the batch. For such a neuron
dW_i / db_i is that input. Fresh rows are drawn every round.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .attack import CLASSIFIER_BIAS, H_FLOOR_PER_SAMPLE, draw_classifier_column
from .exceptions import ProtocolError, ValidationError
from .federation import ClientConfig, FederatedClient
from .model import GradientReport, Layer, ModelParams
from .numerics import SeededRng
from .utils import ValidationUtils

logger = logging.getLogger(__name__)

TRAP_STREAM = 31
CLASSIFIER_STREAM = 32

MODALITY_PRESETS = {
    "image": {"weight_std": math.sqrt(0.5), "scale_factor": 0.99},
    "tabular": {"weight_std": 1.0, "scale_factor": 0.97},
}


@dataclass
class CahConfig:
    """Settings of the trap-weights baseline."""

    neurons: int
    class_count: int
    rounds: int = 1
    weight_std: float = math.sqrt(0.5)
    scale_factor: float = 0.99
    rng_seed: int = 0
    accept_tol: float = 1e-6

    def __post_init__(self):
        ValidationUtils.validate_positive_int(self.neurons, "neurons")
        ValidationUtils.validate_positive_int(self.rounds, "rounds")
        ValidationUtils.validate_positive_int(self.class_count, "class_count")
        ValidationUtils.validate_positive(self.weight_std, "weight_std")
        ValidationUtils.validate_open_unit(self.scale_factor, "scale_factor")
        ValidationUtils.validate_positive(self.accept_tol, "accept_tol")

    @classmethod
    def for_modality(cls, modality: str, **kwargs) -> "CahConfig":
        """Config with the weight scale and s used for image or tabular data."""
        ValidationUtils.validate_choice(modality, tuple(MODALITY_PRESETS), "modality")
        settings = dict(MODALITY_PRESETS[modality])
        settings.update(kwargs)
        return cls(**settings)


@dataclass
class CahResult:
    """Inputs recovered by the baseline and the truth rows they matched."""

    recovered_inputs: np.ndarray
    matched_indices: List[int] = field(default_factory=list)
    rounds_used: int = 0

    @property
    def count(self) -> int:
        return self.recovered_inputs.shape[0]


def craft_trap_weights(d: int, cfg: CahConfig, round_index: int = 0, dtype=np.float64) -> ModelParams:
    """
    Draw trap-weight parameters for one round.

    Every row takes |N(0, weight_std^2)| magnitudes, negates ceil(d/2) of
    them at random positions and scales the remaining positive ones by s, so
    the expected row sum is negative. First-layer biases are zero. The
    classifier has one shared column and biases of 1e25.

    Raises:
        ValidationError: If d < 2
    """
    ValidationUtils.validate_positive_int(d, "d")
    if d < 2:
        raise ValidationError("Trap weights need at least 2 input features")

    rng = SeededRng(cfg.rng_seed).derive(TRAP_STREAM, round_index)
    N = cfg.neurons
    magnitudes = np.abs(rng.normal(0.0, cfg.weight_std, (N, d)))
    ranks = np.argsort(rng.uniform(0.0, 1.0, (N, d)), axis=1)
    negative = np.zeros((N, d), dtype=bool)
    np.put_along_axis(negative, ranks[:, :math.ceil(d / 2)], True, axis=1)
    weights = np.where(negative, -magnitudes, cfg.scale_factor * magnitudes)

    v = draw_classifier_column(SeededRng(cfg.rng_seed).derive(CLASSIFIER_STREAM), cfg.class_count)
    layers = [
        Layer(weights.astype(dtype), np.zeros(N, dtype=dtype)),
        Layer(np.tile(v[:, None], (1, N)).astype(dtype), np.full(cfg.class_count, CLASSIFIER_BIAS, dtype=dtype)),
    ]
    return ModelParams(layers, cfg.class_count)


def match_to_truth(candidate: np.ndarray, truth: np.ndarray, tol: float) -> Optional[int]:
    """Index of the truth row within ``tol`` (Euclidean) of ``candidate``, if any."""
    distances = np.linalg.norm(truth - candidate[None, :], axis=1)
    best = int(np.argmin(distances))
    return best if distances[best] <= tol else None


def recover_single_activations(
    report: GradientReport,
    known: Sequence[np.ndarray],
    tol: float = 1e-6,
    truth: Optional[np.ndarray] = None,
    h_floor: float = 0.0
) -> List[np.ndarray]:
    """
    Extract inputs from neurons that one input activated.

    Args:
        report: Client update for trap-weight parameters
        known: Inputs recovered so far
        tol: Euclidean tolerance for duplicates and for truth acceptance
        truth: Ground-truth inputs; when given, a candidate is accepted only
            if it lies within ``tol`` of one of them
        h_floor: Neurons with |db_i| <= h_floor are skipped

    Returns:
        Newly accepted inputs
    """
    dW, db = report.layers[0]
    accepted: List[np.ndarray] = []
    pool = list(known)
    for i in range(db.shape[0]):
        h = float(db[i])
        if abs(h) <= h_floor:
            continue
        candidate = dW[i].astype(np.float64) / h
        if any(np.linalg.norm(candidate - existing) <= tol for existing in pool):
            continue
        if truth is not None and match_to_truth(candidate, truth, tol) is None:
            continue
        accepted.append(candidate)
        pool.append(candidate)
    return accepted


def run_cah_attack(
    client_config: ClientConfig,
    cfg: CahConfig,
    logger: Optional[logging.Logger] = None,
    dtype=np.float64
) -> CahResult:
    """
    Run the baseline for ``cfg.rounds`` rounds with fresh trap weights each.

    Candidates are checked against the client's true inputs, so every
    reported input is a genuine single activation.

    Raises:
        ProtocolError: If a response does not mirror the model sent
    """
    log = logger if logger else logging.getLogger(__name__)
    truth = client_config.batch.inputs.astype(np.float64)
    d = client_config.batch.dimension
    client = FederatedClient(client_config, log)

    known: List[np.ndarray] = []
    for round_index in range(cfg.rounds):
        params = craft_trap_weights(d, cfg, round_index, dtype)
        response = client.respond(params)
        if not response.matches(params):
            raise ProtocolError(f"Round {round_index}: client update shapes do not mirror the model sent")
        h_floor = H_FLOOR_PER_SAMPLE * (response.batch_size or 1)
        new = recover_single_activations(response.update, known, cfg.accept_tol, truth, h_floor)
        known.extend(new)
        log.debug(f"Trap-weights round {round_index + 1}: {len(new)} new inputs, {len(known)} total")

    matched = [match_to_truth(x, truth, cfg.accept_tol) for x in known]
    recovered = np.vstack(known) if known else np.zeros((0, d))
    log.info(f"Trap-weights baseline recovered {len(known)} of {truth.shape[0]} inputs in {cfg.rounds} rounds")
    return CahResult(recovered, [m for m in matched if m is not None], cfg.rounds)
