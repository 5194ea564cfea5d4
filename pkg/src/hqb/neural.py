"""Dense feed-forward networks with exact reverse-mode gradients.

Covers exactly what the experiments need: affine layers with ReLU / Sigmoid /
no activation, mean-squared-error and softmax cross-entropy losses, and plain
SGD plus Adam. Everything is float64 numpy; forward passes accept a single
vector or a ``(batch, dim)`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Activation(Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    NONE = "none"


class OptimizerKind(Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray  # (out_dim,)
    activation: Activation

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-D (out_dim, in_dim) matrix")
        if self.biases.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bias shape {self.biases.shape} does not match out_dim {self.weights.shape[0]}"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class MlpSpec:
    layers: list[DenseLayer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameter_arrays(self) -> list[np.ndarray]:
        arrays: list[np.ndarray] = []
        for layer in self.layers:
            arrays.append(layer.weights)
            arrays.append(layer.biases)
        return arrays


def build_mlp(dims: list[int], activations: list[Activation], rng: np.random.Generator) -> MlpSpec:
    """Stack dense layers ``dims[i] -> dims[i+1]``.

    Weights draw uniformly from ``[-1/sqrt(in_dim), 1/sqrt(in_dim)]`` and so
    do biases of non-rectifier layers. ReLU-layer biases start at the
    constant ``+1/sqrt(in_dim)``: the narrow rectifier layers these nets use
    (down to 2 or 3 units, often fed strictly positive inputs) otherwise have
    coin-flip odds of starting fully dead, which freezes everything upstream
    of them for the whole run.
    """
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for in_dim, out_dim, act in zip(dims, dims[1:], activations):
        bound = 1.0 / np.sqrt(in_dim)
        weights = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        if act is Activation.RELU:
            biases = np.full(out_dim, bound)
        else:
            biases = rng.uniform(-bound, bound, size=out_dim)
        layers.append(DenseLayer(weights=weights, biases=biases, activation=act))
    return MlpSpec(layers)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, np.asarray(x, dtype=np.float64))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, stable for large |x| (no overflow up to +-500 and beyond)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(0.0, z)
    if activation is Activation.SIGMOID:
        return sigmoid(z)
    return z


@dataclass
class MlpTape:
    """Per-layer values cached by the forward pass for the backward pass."""

    inputs: list[np.ndarray] = field(default_factory=list)  # layer inputs, 2-D
    pre: list[np.ndarray] = field(default_factory=list)  # pre-activation z
    post: list[np.ndarray] = field(default_factory=list)  # activation output
    squeeze: bool = False


@dataclass
class MlpGradients:
    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    d_input: np.ndarray

    def parameter_grads(self) -> list[np.ndarray]:
        grads: list[np.ndarray] = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            grads.append(w)
            grads.append(b)
        return grads


def mlp_forward(spec: MlpSpec, x: np.ndarray) -> tuple[np.ndarray, MlpTape]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != spec.in_dim:
        raise ValueError(f"input dim {a.shape[1]} does not match network in_dim {spec.in_dim}")
    tape = MlpTape(squeeze=squeeze)
    for layer in spec.layers:
        tape.inputs.append(a)
        z = a @ layer.weights.T + layer.biases
        a = _activate(z, layer.activation)
        tape.pre.append(z)
        tape.post.append(a)
    return (a[0] if squeeze else a), tape


def mlp_backward(spec: MlpSpec, tape: MlpTape, upstream: np.ndarray) -> MlpGradients:
    """Exact reverse-mode gradients; parameter gradients are summed over the
    batch rows (callers fold any 1/batch factor into ``upstream``)."""
    g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if len(tape.inputs) != len(spec.layers):
        raise ValueError("tape does not match this network")
    if g.shape != tape.post[-1].shape:
        raise ValueError(f"upstream shape {g.shape} does not match output {tape.post[-1].shape}")
    weight_grads: list[np.ndarray] = [None] * len(spec.layers)
    bias_grads: list[np.ndarray] = [None] * len(spec.layers)
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        if layer.activation is Activation.RELU:
            g = g * (tape.pre[i] > 0)
        elif layer.activation is Activation.SIGMOID:
            s = tape.post[i]
            g = g * s * (1.0 - s)
        weight_grads[i] = g.T @ tape.inputs[i]
        bias_grads[i] = g.sum(axis=0)
        g = g @ layer.weights
    d_input = g[0] if tape.squeeze else g
    return MlpGradients(weight_grads, bias_grads, d_input)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def mse_loss(prediction: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over every element; gradient of the mean."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"shape mismatch: {prediction.shape} vs {target.shape}")
    diff = prediction - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy_loss(logits: np.ndarray, target_one_hot: np.ndarray) -> tuple[float, np.ndarray]:
    """Softmax cross entropy on raw logits, stabilized via log-sum-exp.

    For a batch the loss is the mean over rows and the gradient carries the
    1/batch factor: ``(softmax(logits) - target) / n_rows``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target_one_hot, dtype=np.float64)
    if logits.shape != target.shape:
        raise ValueError(f"shape mismatch: {logits.shape} vs {target.shape}")
    squeeze = logits.ndim == 1
    logits = np.atleast_2d(logits)
    target = np.atleast_2d(target)
    if not (
        np.all((target == 0.0) | (target == 1.0))
        and np.all(target.sum(axis=1) == 1.0)
    ):
        raise ValueError("target rows must be one-hot")
    log_probs = _log_softmax(logits)
    n = logits.shape[0]
    loss = float(-np.sum(log_probs * target) / n)
    grad = (np.exp(log_probs) - target) / n
    return loss, (grad[0] if squeeze else grad)


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

@dataclass
class OptimizerState:
    kind: OptimizerKind
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def _check_layouts(state: OptimizerState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError("parameter and gradient layouts do not match")
    if state.m is not None and (
        len(state.m) != len(params) or any(m.shape != p.shape for m, p in zip(state.m, params))
    ):
        raise ValueError("optimizer moments do not match parameter layout")


def sgd_step(state: OptimizerState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """Plain gradient descent, in place: ``p -= lr * g``."""
    if state.kind is not OptimizerKind.SGD:
        raise ValueError("sgd_step needs an SGD optimizer state")
    _check_layouts(state, params, grads)
    for p, g in zip(params, grads):
        p -= state.learning_rate * g
    state.step_count += 1
    return params


def adam_step(state: OptimizerState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """Adam with bias correction, in place."""
    if state.kind is not OptimizerKind.ADAM:
        raise ValueError("adam_step needs an Adam optimizer state")
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    _check_layouts(state, params, grads)
    state.step_count += 1
    t = state.step_count
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def optimizer_step(state: OptimizerState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    if state.kind is OptimizerKind.SGD:
        return sgd_step(state, params, grads)
    return adam_step(state, params, grads)
