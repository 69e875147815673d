"""
Victim-side simulation of FedSGD rounds.

A client receives model parameters, computes an update on its private batch
and returns it. Full-batch mode returns the plain gradient; local-steps mode
runs K plain SGD steps on disjoint minibatches and returns the effective
update divided by the learning rate. Optional Gaussian noise is added to the
transmitted update.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .exceptions import ConfigurationError, ValidationError
from .model import Batch, GradientReport, ModelParams, batch_gradient
from .numerics import SeededRng
from .utils import ValidationUtils

logger = logging.getLogger(__name__)

SHUFFLE_STREAM = 1
NOISE_STREAM = 2

KIND_GRADIENT = "gradient"
KIND_PARAM_DELTA = "param_delta"


@dataclass(frozen=True)
class FullBatch:
    """One gradient over the whole batch per round."""

    def describe(self) -> str:
        return "full_batch"


@dataclass(frozen=True)
class LocalSteps:
    """K sequential SGD steps on disjoint minibatches of size n_b."""

    steps: int
    minibatch_size: int
    learning_rate: float

    def describe(self) -> str:
        return f"local_steps(K={self.steps}, n_b={self.minibatch_size}, lr={self.learning_rate:g})"


ClientMode = Union[FullBatch, LocalSteps]


@dataclass
class ClientConfig:
    """Private data and training settings of the victim client."""

    batch: Batch
    mode: ClientMode = field(default_factory=FullBatch)
    noise_std: float = 0.0
    rng_seed: int = 0
    report_batch_size: bool = True

    def validate(self) -> bool:
        """
        Check the configuration.

        Returns:
            True if valid

        Raises:
            ConfigurationError: If the noise level is negative or the
                minibatch partition does not fit the batch
        """
        errors = []
        if not np.isfinite(self.noise_std) or self.noise_std < 0:
            errors.append(("noise_std", f"must be non-negative, got {self.noise_std}"))
        if isinstance(self.mode, LocalSteps):
            if self.mode.steps < 1:
                errors.append(("steps", f"must be >= 1, got {self.mode.steps}"))
            if self.mode.minibatch_size < 1:
                errors.append(("minibatch_size", f"must be >= 1, got {self.mode.minibatch_size}"))
            if not self.mode.learning_rate > 0:
                errors.append(("learning_rate", f"must be positive, got {self.mode.learning_rate}"))
            if self.mode.steps * self.mode.minibatch_size > self.batch.size:
                errors.append((
                    "minibatch_size",
                    f"{self.mode.steps} steps of {self.mode.minibatch_size} samples exceed "
                    f"the {self.batch.size} available"
                ))
        if errors:
            raise ConfigurationError("Invalid client configuration", errors)
        return True

    @property
    def effective_batch_size(self) -> int:
        """Divisor applied to each sample's contribution in the returned update."""
        if isinstance(self.mode, LocalSteps):
            return self.mode.minibatch_size
        return self.batch.size

    @property
    def sample_count(self) -> int:
        """Number of samples that contribute to one update."""
        if isinstance(self.mode, LocalSteps):
            return self.mode.steps * self.mode.minibatch_size
        return self.batch.size


@dataclass
class ClientResponse:
    """
    Update returned by the client for one round.

    ``update`` always has the shape of a GradientReport; for ``param_delta``
    responses it holds (final - received) / learning_rate. ``batch_size`` is
    the divisor of each sample's contribution and ``sample_count`` the number
    of samples behind the update; both are None when the client withholds them.
    """

    kind: str
    update: GradientReport
    round_index: int
    batch_size: Optional[int] = None
    sample_count: Optional[int] = None

    def matches(self, params: ModelParams) -> bool:
        return self.update.matches(params)


def _local_steps_delta(config: ClientConfig, params: ModelParams) -> GradientReport:
    mode = config.mode
    order = SeededRng(config.rng_seed).derive(SHUFFLE_STREAM).permutation(config.batch.size)

    current = params
    losses: List[float] = []
    for step in range(mode.steps):
        indices = order[step * mode.minibatch_size:(step + 1) * mode.minibatch_size]
        grad = batch_gradient(current, config.batch.subset(indices))
        losses.append(grad.loss)
        current = current.apply_update(grad, -mode.learning_rate)

    layers = [
        ((new.weights - old.weights) / mode.learning_rate, (new.biases - old.biases) / mode.learning_rate)
        for new, old in zip(current.layers, params.layers)
    ]
    return GradientReport(layers, float(np.mean(losses)))


def _add_noise(report: GradientReport, std: float, rng: SeededRng) -> GradientReport:
    noisy = []
    for dw, db in report.layers:
        noisy.append((
            dw + rng.normal(0.0, std, dw.shape).astype(dw.dtype, copy=False),
            db + rng.normal(0.0, std, db.shape).astype(db.dtype, copy=False)
        ))
    return GradientReport(noisy, report.loss)


def client_round(config: ClientConfig, params: ModelParams, round_index: int = 0) -> ClientResponse:
    """
    Compute the client's response to ``params``.

    Args:
        config: Client data and training mode
        params: Parameters sent by the server this round
        round_index: Round counter, mixed into the noise stream

    Returns:
        ClientResponse of kind "gradient" (full batch) or "param_delta"
        (local steps), with i.i.d. N(0, noise_std^2) added to every entry
        when noise_std > 0

    Raises:
        ConfigurationError: If the config is invalid
        ValidationError: If the parameters do not fit the data
    """
    config.validate()
    ValidationUtils.validate_dimension_match(params.input_dim, config.batch.dimension, "client data")
    if config.batch.class_count > params.class_count:
        raise ValidationError(
            f"Model outputs {params.class_count} classes, data has {config.batch.class_count}"
        )

    if isinstance(config.mode, LocalSteps):
        kind = KIND_PARAM_DELTA
        update = _local_steps_delta(config, params)
    else:
        kind = KIND_GRADIENT
        update = batch_gradient(params, config.batch)

    if config.noise_std > 0:
        rng = SeededRng(config.rng_seed).derive(NOISE_STREAM, round_index)
        update = _add_noise(update, config.noise_std, rng)

    if config.report_batch_size:
        batch_size, sample_count = config.effective_batch_size, config.sample_count
    else:
        batch_size, sample_count = None, None
    return ClientResponse(
        kind=kind, update=update, round_index=round_index, batch_size=batch_size, sample_count=sample_count
    )


class FederatedClient:
    """
    Stateful wrapper that answers successive rounds for one client.

    Example:
        client = FederatedClient(ClientConfig(batch))
        response = client.respond(params)
    """

    def __init__(self, config: ClientConfig, logger: Optional[logging.Logger] = None):
        """
        Initialize FederatedClient.

        Args:
            config: Client configuration (validated here)
            logger: Optional logger instance
        """
        config.validate()
        self.config = config
        self.logger = logger if logger else logging.getLogger(__name__)
        self.rounds_served = 0

    def respond(self, params: ModelParams) -> ClientResponse:
        """Answer the next round."""
        response = client_round(self.config, params, self.rounds_served)
        self.logger.debug(
            f"Client answered round {self.rounds_served} "
            f"({self.config.mode.describe()}, noise_std={self.config.noise_std:g})"
        )
        self.rounds_served += 1
        return response
