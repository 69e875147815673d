"""
Fully connected ReLU network with softmax cross-entropy loss.

Parameters are stored as an ordered list of layers, each holding a weight
matrix of shape (out, in) and a bias vector of length out. Every layer except
the last applies ReLU; the last layer produces logits. Gradients are
computed analytically by backpropagation through cached activations.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ValidationError
from .numerics import column_sum, log_softmax, matmul, matvec, stable_softmax
from .utils import ValidationUtils

logger = logging.getLogger(__name__)


@dataclass
class Layer:
    """One affine layer: weights (out, in) and biases (out,)."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        ValidationUtils.validate_finite_array(self.weights, "weights", ndim=2)
        ValidationUtils.validate_finite_array(self.biases, "biases", ndim=1)
        ValidationUtils.validate_dimension_match(self.weights.shape[0], self.biases.shape[0], "layer biases")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "Layer":
        return Layer(self.weights.copy(), self.biases.copy())


@dataclass
class ModelParams:
    """
    Parameters of a depth-L network (L >= 2).

    The first layer is the attack layer: its output width is the neuron
    count N. The last layer maps to ``class_count`` logits.
    """

    layers: List[Layer]
    class_count: int

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValidationError(f"ModelParams needs at least 2 layers, got {len(self.layers)}")
        ValidationUtils.validate_positive_int(self.class_count, "class_count")
        for index in range(1, len(self.layers)):
            ValidationUtils.validate_dimension_match(
                self.layers[index - 1].out_dim,
                self.layers[index].in_dim,
                f"layer {index} input"
            )
        ValidationUtils.validate_dimension_match(self.class_count, self.layers[-1].out_dim, "output layer")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def attack_width(self) -> int:
        """Neuron count N of the first layer."""
        return self.layers[0].out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dtype(self):
        return self.layers[0].weights.dtype

    def shapes(self) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        return [(layer.weights.shape, layer.biases.shape) for layer in self.layers]

    def copy(self) -> "ModelParams":
        return ModelParams([layer.copy() for layer in self.layers], self.class_count)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            [Layer(layer.weights.astype(dtype), layer.biases.astype(dtype)) for layer in self.layers],
            self.class_count
        )

    def with_first_layer_biases(self, biases: np.ndarray) -> "ModelParams":
        """Return a copy sharing all arrays except the first-layer biases."""
        biases = np.asarray(biases, dtype=self.dtype)
        ValidationUtils.validate_dimension_match(self.attack_width, biases.shape[0], "first-layer biases")
        first = Layer(self.layers[0].weights, biases.copy())
        return ModelParams([first] + list(self.layers[1:]), self.class_count)

    def apply_update(self, update: "GradientReport", scale: float) -> "ModelParams":
        """Return params + scale * update, layer by layer."""
        if not update.matches(self):
            raise ValidationError("Update shapes do not mirror the model")
        layers = [
            Layer(layer.weights + scale * dw, layer.biases + scale * db)
            for layer, (dw, db) in zip(self.layers, update.layers)
        ]
        return ModelParams(layers, self.class_count)


@dataclass
class Batch:
    """A client's private inputs (n, d) and integer labels (n,)."""

    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        ValidationUtils.validate_finite_array(self.inputs, "inputs", ndim=2)
        ValidationUtils.validate_positive_int(self.class_count, "class_count")
        if self.labels.ndim != 1:
            raise ValidationError(f"labels must be 1-dimensional, got shape {self.labels.shape}")
        ValidationUtils.validate_dimension_match(self.inputs.shape[0], self.labels.shape[0], "labels")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise ValidationError(f"labels must lie in [0, {self.class_count})")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def dimension(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices: Sequence[int]) -> "Batch":
        indices = np.asarray(indices, dtype=np.int64)
        return Batch(self.inputs[indices], self.labels[indices], self.class_count)

    def astype(self, dtype) -> "Batch":
        return Batch(self.inputs.astype(dtype), self.labels, self.class_count)


@dataclass
class GradientReport:
    """Per-layer (dW, db) of the mean loss, plus the mean loss itself."""

    layers: List[Tuple[np.ndarray, np.ndarray]]
    loss: float = 0.0

    def matches(self, params: ModelParams) -> bool:
        """True if every tensor has the shape of its counterpart in ``params``."""
        if len(self.layers) != params.depth:
            return False
        return all(
            dw.shape == layer.weights.shape and db.shape == layer.biases.shape
            for (dw, db), layer in zip(self.layers, params.layers)
        )

    def scaled(self, factor: float) -> "GradientReport":
        return GradientReport([(dw * factor, db * factor) for dw, db in self.layers], self.loss)

    def flatten(self) -> np.ndarray:
        parts = []
        for dw, db in self.layers:
            parts.append(dw.ravel())
            parts.append(db.ravel())
        return np.concatenate(parts)


def _check_input(params: ModelParams, x: np.ndarray):
    ValidationUtils.validate_dimension_match(params.input_dim, x.shape[-1], "input")


def forward(params: ModelParams, x: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    """
    Forward pass for a single input.

    Args:
        params: Network parameters
        x: Input vector of length d

    Returns:
        (activations, probs). ``activations[0]`` is x, ``activations[l]`` the
        output of layer l (ReLU applied except on the last, which holds the
        logits). ``probs`` is the softmax of the logits.

    Raises:
        ValidationError: If x has the wrong dimension
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValidationError(f"forward expects a single input vector, got shape {x.shape}")
    _check_input(params, x)

    activations = [x]
    current = x
    last = params.depth - 1
    for index, layer in enumerate(params.layers):
        current = matvec(layer.weights, current) + layer.biases
        if index < last:
            current = np.maximum(current, 0.0)
        activations.append(current)
    return activations, stable_softmax(current)


def forward_batch(params: ModelParams, inputs: np.ndarray) -> List[np.ndarray]:
    """Batched forward pass; returns the activation list with one row per input."""
    inputs = np.asarray(inputs)
    _check_input(params, inputs)

    activations = [inputs]
    current = inputs
    last = params.depth - 1
    for index, layer in enumerate(params.layers):
        current = matmul(current, layer.weights.T) + layer.biases
        if index < last:
            current = np.maximum(current, 0.0)
        activations.append(current)
    return activations


def mean_loss(params: ModelParams, batch: Batch) -> float:
    """Mean cross-entropy of ``batch`` under ``params``."""
    logits = forward_batch(params, batch.inputs)[-1]
    return _cross_entropy(logits, batch.labels)


def _cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    log_probs = log_softmax(logits)
    picked = log_probs[np.arange(labels.shape[0]), labels]
    total = 0.0
    for value in picked:
        total -= float(value)
    return total / labels.shape[0]


def batch_gradient(params: ModelParams, batch: Batch) -> GradientReport:
    """
    Gradient of the mean cross-entropy over ``batch``.

    Backpropagates through the cached ReLU masks. A unit whose pre-activation
    is exactly 0 counts as inactive.

    Args:
        params: Network parameters
        batch: Non-empty batch

    Returns:
        GradientReport with one (dW, db) per layer and the mean loss

    Raises:
        ValidationError: If the batch does not fit the network
    """
    _check_input(params, batch.inputs)
    if batch.class_count > params.class_count:
        raise ValidationError(
            f"Batch declares {batch.class_count} classes but the model outputs {params.class_count}"
        )

    n = batch.size
    activations = forward_batch(params, batch.inputs)
    logits = activations[-1]

    delta = stable_softmax(logits)
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n

    grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * params.depth
    for index in range(params.depth - 1, -1, -1):
        layer_input = activations[index]
        grads[index] = (matmul(delta.T, layer_input), column_sum(delta))
        if index > 0:
            delta = matmul(delta, params.layers[index].weights) * (layer_input > 0)

    return GradientReport(grads, _cross_entropy(logits, batch.labels))


def sample_gradient(params: ModelParams, x: np.ndarray, y: int) -> GradientReport:
    """Gradient of a single sample's loss."""
    x = np.asarray(x)
    batch = Batch(x[None, :], np.array([y]), params.class_count)
    return batch_gradient(params, batch)


def per_sample_bias_grad(params: ModelParams, sample: Tuple[np.ndarray, int], neuron: int) -> float:
    """
    Derivative of one sample's loss w.r.t. a first-layer bias.

    Applies the chain rule layer by layer from the logits back to the first
    layer. Returns exactly 0.0 when the sample does not activate ``neuron``.

    Args:
        params: Network parameters
        sample: (x, y) pair
        neuron: Index into the first layer

    Returns:
        The partial derivative as a float
    """
    x, y = sample
    ValidationUtils.validate_index(neuron, params.attack_width, "neuron")
    ValidationUtils.validate_index(int(y), params.class_count, "label")

    activations, probs = forward(params, np.asarray(x))
    if activations[1][neuron] <= 0:
        return 0.0

    delta = probs.copy()
    delta[int(y)] -= 1.0
    for index in range(params.depth - 1, 1, -1):
        delta = matvec(params.layers[index].weights.T, delta) * (activations[index] > 0)
    column = params.layers[1].weights[:, neuron]
    total = 0.0
    for k in range(column.shape[0]):
        total += float(column[k]) * float(delta[k])
    return total


def per_sample_bias_grads(params: ModelParams, batch: Batch) -> np.ndarray:
    """
    Matrix of per-sample first-layer bias derivatives, shape (n, N).

    Row j equals ``per_sample_bias_grad`` of sample j for every neuron; the
    batch-averaged db of the first layer is the column mean.
    """
    activations = forward_batch(params, batch.inputs)
    delta = stable_softmax(activations[-1])
    delta[np.arange(batch.size), batch.labels] -= 1.0
    for index in range(params.depth - 1, 0, -1):
        delta = matmul(delta, params.layers[index].weights) * (activations[index] > 0)
    return delta
