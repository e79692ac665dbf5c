"""Layer-wise extract/filter explanations of dense networks.

Each neuron is compared against its benchmark form (its bias-augmented weight
row scaled to unit norm). The signed gap between the neuron's actual response
and the benchmark projection is its degree: positive means the direction of
its weight row is extracted, negative means it is filtered. Samples are moved
along the responsible weight rows by ``epsilon * degree`` and the movement is
carried from the output layer back to the input space.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from errors import DegenerateNeuronError, EmptyLayerError, RejectedInputError
from nn_core import ActivationTrace, DenseLayer, DenseNet, activate, forward_traced

logger = logging.getLogger(__name__)

# epsilon per downstream task
EPSILON_FAITHFULNESS = 1.0
EPSILON_CONCEPTS = 100.0
EPSILON_FEDERATED = 1000.0

NORM_FLOOR = 0.0


@dataclass
class BenchmarkLayer:
    unit_weights: np.ndarray  # rows of [weights | bias] / norm, degenerate rows left at zero
    row_norms: np.ndarray

    @property
    def degenerate(self) -> np.ndarray:
        return self.row_norms <= NORM_FLOOR


def benchmark_layer(layer: DenseLayer) -> BenchmarkLayer:
    """Divides every bias-augmented weight row by its Euclidean norm."""
    augmented = np.hstack([layer.weights, layer.bias[:, None]])
    norms = np.linalg.norm(augmented, axis=1)
    unit = np.zeros_like(augmented)
    alive = norms > NORM_FLOOR
    unit[alive] = augmented[alive] / norms[alive, None]
    return BenchmarkLayer(unit_weights=unit, row_norms=norms)


def neuron_degree(x, w, b: float, activation: str) -> float:
    """sigma(x~ . w~) - x~ . (w~ / |w~|) with the bias folded in as a unit feature."""
    if activation == "softmax":
        raise RejectedInputError("softmax is not element-wise; use layer_transform for softmax layers")
    x_aug = np.append(np.asarray(x, dtype=np.float64), 1.0)
    w_aug = np.append(np.asarray(w, dtype=np.float64), float(b))
    norm = np.linalg.norm(w_aug)
    if norm <= NORM_FLOOR:
        raise DegenerateNeuronError("augmented weight vector has zero norm")
    response = float(activate(activation, np.array(x_aug @ w_aug)))
    return response - float(x_aug @ (w_aug / norm))


def projection_degree(v1, v2) -> float:
    """v1 . v2 - v1 . (v2 / |v2|); the activation-free form of a neuron degree."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    norm = np.linalg.norm(v2)
    if norm <= NORM_FLOOR:
        raise DegenerateNeuronError("projection direction has zero norm")
    return float(v1 @ v2 - v1 @ (v2 / norm))


def layer_degrees(x: np.ndarray, layer: DenseLayer) -> Tuple[np.ndarray, np.ndarray]:
    """Degrees of every neuron for input ``x`` and the mask of non-degenerate neurons."""
    bench = benchmark_layer(layer)
    alive = ~bench.degenerate
    x_aug = np.append(x, 1.0)
    # softmax responses are taken from the whole layer output
    response = activate(layer.activation, layer.weights @ x + layer.bias)
    degrees = np.where(alive, response - bench.unit_weights @ x_aug, 0.0)
    return degrees, alive


def _mean_shift(x: np.ndarray, coefficients: np.ndarray, weights: np.ndarray, alive: np.ndarray, epsilon: float):
    # mean over per-neuron x'_i = x + eps * c_i * w_i, with x kept outside the mean
    shifts = epsilon * coefficients[alive, None] * weights[alive]
    return x + shifts.mean(axis=0)


def layer_transform(x, layer: DenseLayer, epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
    """Transformed sample x' and per-neuron degrees for one layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.in_dim,):
        raise RejectedInputError(f"layer expects {layer.in_dim} inputs, got shape {x.shape}")
    degrees, alive = layer_degrees(x, layer)
    if not alive.any():
        raise EmptyLayerError("every neuron in the layer is degenerate")
    return _mean_shift(x, degrees, layer.weights, alive, epsilon), degrees


# --- EXPLANATION RECORDS ---

@dataclass
class LayerTransformation:
    layer_index: int
    x: np.ndarray
    degrees: np.ndarray
    x_prime: np.ndarray


@dataclass
class TransformationRecord:
    per_layer: List[LayerTransformation]
    input_space_x_prime: np.ndarray
    epsilon: float

    @property
    def x(self) -> np.ndarray:
        """The original sample (input of the first layer)."""
        return self.per_layer[0].x

    def to_dict(self, model_hash: str = "", sample_id: Optional[int] = None) -> dict:
        return {
            "epsilon": self.epsilon,
            "model_hash": model_hash,
            "sample_id": sample_id,
            "input_space_x_prime": self.input_space_x_prime.tolist(),
            "layers": [
                {
                    "layer_index": t.layer_index,
                    "x": t.x.tolist(),
                    "degrees": t.degrees.tolist(),
                    "x_prime": t.x_prime.tolist(),
                }
                for t in self.per_layer
            ],
        }

    def to_json(self, model_hash: str = "", sample_id: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(model_hash, sample_id), indent=2)


def _check_trace(net: DenseNet, trace: ActivationTrace):
    if len(trace.per_layer_inputs) != len(net.layers):
        raise RejectedInputError(
            f"trace has {len(trace.per_layer_inputs)} layers, net has {len(net.layers)}"
        )
    for i, (layer, a) in enumerate(zip(net.layers, trace.per_layer_inputs)):
        if np.shape(a) != (layer.in_dim,):
            raise RejectedInputError(f"trace input of layer {i} does not match the layer width")


def explain(net: DenseNet, trace: ActivationTrace, epsilon: float) -> TransformationRecord:
    """Pulls the per-layer transformations back from the output layer to the input space.

    Layer l combines its own degrees with the output-space delta handed down by
    layer l+1 and hands ``x' - a`` to layer l-1. The last layer starts from a
    zero delta.
    """
    if not epsilon >= 0.0:
        raise RejectedInputError(f"epsilon must be non-negative, got {epsilon}")
    _check_trace(net, trace)
    delta = np.zeros(net.output_dim)
    per_layer = []
    for index in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[index]
        a = np.asarray(trace.per_layer_inputs[index], dtype=np.float64)
        degrees, alive = layer_degrees(a, layer)
        if not alive.any():
            raise EmptyLayerError(f"every neuron in layer {index} is degenerate")
        x_prime = _mean_shift(a, degrees + delta, layer.weights, alive, epsilon)
        per_layer.append(LayerTransformation(index, a, degrees, x_prime))
        delta = x_prime - a
    per_layer.reverse()
    return TransformationRecord(per_layer=per_layer, input_space_x_prime=per_layer[0].x_prime, epsilon=epsilon)


def explain_sample(net: DenseNet, x, epsilon: float) -> TransformationRecord:
    return explain(net, forward_traced(net, x), epsilon)


def explain_batch(net: DenseNet, X, epsilon: float) -> np.ndarray:
    """Input-space x' for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty_like(X)
    for i, row in enumerate(X):
        out[i] = explain_sample(net, row, epsilon).input_space_x_prime
    return out


# --- ATTRIBUTION ---

@dataclass
class AttributionMap:
    scores: np.ndarray
    ranking: np.ndarray = field(default=None)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.ranking is None:
            self.ranking = rank_descending(self.scores)


def rank_descending(scores) -> np.ndarray:
    """Indices by descending score; ties keep the lower index first."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def attribution_from_transform(record: TransformationRecord) -> AttributionMap:
    """Transformation magnitude |x'_j - x_j| of every input feature."""
    return AttributionMap(np.abs(record.input_space_x_prime - record.x))


def attributions_for(net: DenseNet, X, epsilon: float = EPSILON_FAITHFULNESS) -> List[AttributionMap]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return [attribution_from_transform(explain_sample(net, row, epsilon)) for row in X]
