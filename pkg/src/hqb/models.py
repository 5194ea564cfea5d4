"""The six experiment architectures behind one forward/backward interface.

Kinds
-----
``ae-vqc``         frozen autoencoder encoder -> angle-embedding circuit.
``vqc-amplitude``  amplitude-embedding circuit on the raw features; the first
                   ``n_classes`` wire expectations serve as logits.
``dqc``            trainable compression layer -> circuit -> trainable output
                   layer, optimized in a classical then a quantum stage.
``sequent``        trainable compression layer -> surrogate dense head in the
                   classical stage; the surrogate is swapped for the circuit
                   in the quantum stage and only circuit weights train.
``nn``             one-hidden-layer network on the raw input, sized to match
                   the ae-vqc trainable parameter budget.
``ae-nn``          frozen encoder -> one-hidden-layer network sized to match
                   the circuit parameter budget.

Every kind exposes ``model_forward`` / ``model_backward`` /
``trainable_arrays`` so the training loops never branch on architecture.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .neural import Activation, MlpSpec, DenseLayer, build_mlp, mlp_forward, mlp_backward
from .quantum import (
    CircuitSpec,
    CircuitTape,
    Embedding,
    circuit_backward_batch,
    circuit_forward_batch,
)

CHECKPOINT_FORMAT = 1

QUANTUM_INIT_BOUND = 0.1


class ModelKind(Enum):
    AE_VQC = "ae-vqc"
    VQC_AMPLITUDE = "vqc-amplitude"
    DQC = "dqc"
    SEQUENT = "sequent"
    NN = "nn"
    AE_NN = "ae-nn"


TWO_STAGE_KINDS = (ModelKind.DQC, ModelKind.SEQUENT)
ENCODER_KINDS = (ModelKind.AE_VQC, ModelKind.AE_NN)


class Stage(Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"


# ---------------------------------------------------------------------------
# architecture arithmetic
# ---------------------------------------------------------------------------

def build_encoder_dims(input_dim: int, n_classes: int) -> list[int]:
    """Halve the width (floor division) until it hits the class count.

    The last entry is always exactly ``n_classes``; if halving would
    undershoot it, the final layer is set to ``n_classes`` directly.
    """
    if n_classes < 1:
        raise ValueError("n_classes must be positive")
    if input_dim < n_classes:
        raise ValueError(f"input_dim {input_dim} smaller than n_classes {n_classes}")
    dims = [input_dim]
    while dims[-1] // 2 > n_classes:
        dims.append(dims[-1] // 2)
    dims.append(n_classes)
    return dims


def _half_activations(n_layers: int) -> list[Activation]:
    return [Activation.RELU] * (n_layers - 1) + [Activation.SIGMOID]


def autoencoder_dims(input_dim: int, n_classes: int) -> tuple[list[int], list[int]]:
    encoder = build_encoder_dims(input_dim, n_classes)
    return encoder, list(reversed(encoder))


def build_autoencoder(input_dim: int, n_classes: int, rng: np.random.Generator) -> MlpSpec:
    """Encoder plus mirrored decoder; ReLU throughout, Sigmoid closing each half."""
    enc_dims, dec_dims = autoencoder_dims(input_dim, n_classes)
    dims = enc_dims + dec_dims[1:]
    activations = _half_activations(len(enc_dims) - 1) + _half_activations(len(dec_dims) - 1)
    return build_mlp(dims, activations, rng)


def encoder_layer_count(input_dim: int, n_classes: int) -> int:
    return len(build_encoder_dims(input_dim, n_classes)) - 1


def split_encoder(autoencoder: MlpSpec, input_dim: int, n_classes: int) -> MlpSpec:
    """The encoder half of a trained autoencoder."""
    return MlpSpec(autoencoder.layers[: encoder_layer_count(input_dim, n_classes)])


def count_parameters(arrays) -> int:
    return int(sum(a.size for a in arrays))


def _dims_parameter_count(dims: list[int]) -> int:
    return sum(o * i + o for i, o in zip(dims, dims[1:]))


def autoencoder_parameter_count(input_dim: int, n_classes: int) -> int:
    enc_dims, dec_dims = autoencoder_dims(input_dim, n_classes)
    return _dims_parameter_count(enc_dims) + _dims_parameter_count(dec_dims)


def circuit_weight_count(n_qubits: int, n_layers: int) -> int:
    return n_qubits * n_layers


def aevqc_total_parameters(input_dim: int, n_classes: int, n_layers: int = 6) -> int:
    """Trainable parameter budget of the reference model: full autoencoder
    plus circuit weights."""
    return autoencoder_parameter_count(input_dim, n_classes) + circuit_weight_count(
        n_classes, n_layers
    )


def hidden_layer_width(n_total: int, n_input: int, n_output: int) -> int:
    """Hidden width that brings a one-hidden-layer net to ``n_total``
    parameters: ceil((n_total - n_out) / (n_in + n_out + 1)), at least 1."""
    return max(math.ceil((n_total - n_output) / (n_input + n_output + 1)), 1)


def amplitude_qubit_count(n_features: int) -> int:
    return max(math.ceil(math.log2(n_features)), 1)


# ---------------------------------------------------------------------------
# model container
# ---------------------------------------------------------------------------

@dataclass
class HybridModel:
    kind: ModelKind
    input_dim: int
    n_classes: int
    n_layers: int
    seed: int | None = None
    encoder: MlpSpec | None = None
    pre: MlpSpec | None = None
    post: MlpSpec | None = None
    surrogate: MlpSpec | None = None
    head: MlpSpec | None = None
    circuit: CircuitSpec | None = None


def _init_circuit(n_qubits: int, n_layers: int, embedding: Embedding, rng) -> CircuitSpec:
    weights = rng.uniform(-QUANTUM_INIT_BOUND, QUANTUM_INIT_BOUND, size=n_qubits * n_layers)
    return CircuitSpec(n_qubits, n_layers, weights, embedding)


def build_model(
    kind: ModelKind,
    input_dim: int,
    n_classes: int,
    rng: np.random.Generator,
    n_layers: int = 6,
    trained_encoder: MlpSpec | None = None,
    seed: int | None = None,
) -> HybridModel:
    model = HybridModel(kind, input_dim, n_classes, n_layers, seed=seed)
    if kind in ENCODER_KINDS:
        if trained_encoder is None:
            raise ValueError(f"{kind.value} needs a trained encoder")
        if trained_encoder.in_dim != input_dim or trained_encoder.out_dim != n_classes:
            raise ValueError(
                f"encoder maps {trained_encoder.in_dim}->{trained_encoder.out_dim}, "
                f"expected {input_dim}->{n_classes}"
            )
        model.encoder = trained_encoder
    if kind is ModelKind.AE_VQC:
        model.circuit = _init_circuit(n_classes, n_layers, Embedding.ANGLE, rng)
    elif kind is ModelKind.VQC_AMPLITUDE:
        model.circuit = _init_circuit(
            amplitude_qubit_count(input_dim), n_layers, Embedding.AMPLITUDE, rng
        )
    elif kind is ModelKind.DQC:
        model.pre = build_mlp([input_dim, n_classes], [Activation.SIGMOID], rng)
        model.circuit = _init_circuit(n_classes, n_layers, Embedding.ANGLE, rng)
        model.post = build_mlp([n_classes, n_classes], [Activation.NONE], rng)
    elif kind is ModelKind.SEQUENT:
        model.pre = build_mlp([input_dim, n_classes], [Activation.SIGMOID], rng)
        model.surrogate = build_mlp([n_classes, n_classes], [Activation.NONE], rng)
        model.circuit = _init_circuit(n_classes, n_layers, Embedding.ANGLE, rng)
    elif kind is ModelKind.NN:
        width = hidden_layer_width(
            aevqc_total_parameters(input_dim, n_classes, n_layers), input_dim, n_classes
        )
        model.head = build_mlp(
            [input_dim, width, n_classes], [Activation.RELU, Activation.NONE], rng
        )
    elif kind is ModelKind.AE_NN:
        width = hidden_layer_width(
            circuit_weight_count(n_classes, n_layers), n_classes, n_classes
        )
        model.head = build_mlp(
            [n_classes, width, n_classes], [Activation.RELU, Activation.NONE], rng
        )
    return model


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

@dataclass
class ModelTape:
    stage: Stage | None
    mlp_tapes: dict
    circuit_tape: CircuitTape | None = None
    squeeze: bool = False


def _resolve_stage(kind: ModelKind, stage: Stage | None) -> Stage | None:
    if stage is None and kind in TWO_STAGE_KINDS:
        return Stage.QUANTUM  # final routing once training is done
    return stage


def model_forward(
    model: HybridModel, x: np.ndarray, stage: Stage | None = None
) -> tuple[np.ndarray, ModelTape]:
    """Class logits for a sample or batch; the tape feeds ``model_backward``."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    stage = _resolve_stage(model.kind, stage)
    tapes: dict = {}
    circuit_tape = None
    kind = model.kind
    if kind is ModelKind.NN:
        logits, tapes["head"] = mlp_forward(model.head, x)
    elif kind is ModelKind.AE_NN:
        compressed, tapes["encoder"] = mlp_forward(model.encoder, x)
        logits, tapes["head"] = mlp_forward(model.head, compressed)
    elif kind is ModelKind.AE_VQC:
        compressed, tapes["encoder"] = mlp_forward(model.encoder, x)
        logits, circuit_tape = circuit_forward_batch(model.circuit, compressed)
    elif kind is ModelKind.VQC_AMPLITUDE:
        expectations, circuit_tape = circuit_forward_batch(model.circuit, x)
        logits = expectations[:, : model.n_classes]
    elif kind is ModelKind.DQC:
        reduced, tapes["pre"] = mlp_forward(model.pre, x)
        expectations, circuit_tape = circuit_forward_batch(model.circuit, reduced)
        logits, tapes["post"] = mlp_forward(model.post, expectations)
    elif kind is ModelKind.SEQUENT:
        reduced, tapes["pre"] = mlp_forward(model.pre, x)
        if stage is Stage.CLASSICAL:
            logits, tapes["surrogate"] = mlp_forward(model.surrogate, reduced)
        else:
            logits, circuit_tape = circuit_forward_batch(model.circuit, reduced)
    else:  # pragma: no cover
        raise ValueError(f"unknown kind {kind}")
    tape = ModelTape(stage=stage, mlp_tapes=tapes, circuit_tape=circuit_tape, squeeze=squeeze)
    return (logits[0] if squeeze else logits), tape


def trainable_arrays(model: HybridModel, stage: Stage | None = None) -> list[np.ndarray]:
    """Parameter arrays the given training stage updates, in gradient order."""
    stage = _resolve_stage(model.kind, stage)
    kind = model.kind
    if kind in (ModelKind.NN, ModelKind.AE_NN):
        return model.head.parameter_arrays()
    if kind in (ModelKind.AE_VQC, ModelKind.VQC_AMPLITUDE):
        return [model.circuit.weights]
    if kind is ModelKind.DQC:
        if stage is Stage.CLASSICAL:
            return model.pre.parameter_arrays() + model.post.parameter_arrays()
        return [model.circuit.weights]
    if kind is ModelKind.SEQUENT:
        if stage is Stage.CLASSICAL:
            return model.pre.parameter_arrays() + model.surrogate.parameter_arrays()
        return [model.circuit.weights]
    raise ValueError(f"unknown kind {kind}")  # pragma: no cover


def model_backward(
    model: HybridModel, tape: ModelTape, upstream: np.ndarray, stage: Stage | None = None
) -> list[np.ndarray]:
    """Gradients for ``trainable_arrays(model, stage)`` given dL/d(logits)."""
    upstream = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    stage = _resolve_stage(model.kind, stage)
    if tape.stage is not stage:
        raise ValueError(f"tape was recorded for stage {tape.stage}, not {stage}")
    kind = model.kind
    if kind in (ModelKind.NN, ModelKind.AE_NN):
        grads = mlp_backward(model.head, tape.mlp_tapes["head"], upstream)
        return grads.parameter_grads()
    if kind is ModelKind.AE_VQC:
        d_weights, _ = circuit_backward_batch(model.circuit, tape.circuit_tape, upstream)
        return [d_weights]
    if kind is ModelKind.VQC_AMPLITUDE:
        full = np.zeros((upstream.shape[0], model.circuit.n_qubits))
        full[:, : model.n_classes] = upstream
        d_weights, _ = circuit_backward_batch(model.circuit, tape.circuit_tape, full)
        return [d_weights]
    if kind is ModelKind.DQC:
        post_grads = mlp_backward(model.post, tape.mlp_tapes["post"], upstream)
        if stage is Stage.CLASSICAL:
            _, d_reduced = circuit_backward_batch(
                model.circuit, tape.circuit_tape, post_grads.d_input, need_input_grad=True
            )
            pre_grads = mlp_backward(model.pre, tape.mlp_tapes["pre"], d_reduced)
            return pre_grads.parameter_grads() + post_grads.parameter_grads()
        d_weights, _ = circuit_backward_batch(
            model.circuit, tape.circuit_tape, post_grads.d_input
        )
        return [d_weights]
    if kind is ModelKind.SEQUENT:
        if stage is Stage.CLASSICAL:
            surr_grads = mlp_backward(model.surrogate, tape.mlp_tapes["surrogate"], upstream)
            pre_grads = mlp_backward(model.pre, tape.mlp_tapes["pre"], surr_grads.d_input)
            return pre_grads.parameter_grads() + surr_grads.parameter_grads()
        d_weights, _ = circuit_backward_batch(model.circuit, tape.circuit_tape, upstream)
        return [d_weights]
    raise ValueError(f"unknown kind {kind}")  # pragma: no cover


def trainable_parameter_count(model: HybridModel, stage: Stage | None = None) -> int:
    """Size of the parameter group the given stage trains.

    For the autoencoder-backed kinds the classical stage is the autoencoder
    fit itself, so ``Stage.CLASSICAL`` reports the full encoder+decoder count
    even though the live model only carries the frozen encoder.
    """
    if stage is Stage.CLASSICAL and model.kind in ENCODER_KINDS:
        return autoencoder_parameter_count(model.input_dim, model.n_classes)
    return count_parameters(trainable_arrays(model, stage))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_MLP_PARTS = ("encoder", "pre", "post", "surrogate", "head")


def _mlp_meta(spec: MlpSpec) -> list[str]:
    return [layer.activation.value for layer in spec.layers]


def save_checkpoint(model: HybridModel, path) -> None:
    """Write the model as an npz archive; arrays round-trip bit-exactly."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "kind": model.kind.value,
        "input_dim": model.input_dim,
        "n_classes": model.n_classes,
        "n_layers": model.n_layers,
        "seed": model.seed,
        "parts": {},
    }
    arrays: dict[str, np.ndarray] = {}
    for part in _MLP_PARTS:
        spec = getattr(model, part)
        if spec is None:
            continue
        meta["parts"][part] = _mlp_meta(spec)
        for i, layer in enumerate(spec.layers):
            arrays[f"{part}.{i}.weights"] = layer.weights
            arrays[f"{part}.{i}.biases"] = layer.biases
    if model.circuit is not None:
        meta["circuit"] = {
            "n_qubits": model.circuit.n_qubits,
            "n_layers": model.circuit.n_layers,
            "embedding": model.circuit.embedding.value,
        }
        arrays["circuit.weights"] = model.circuit.weights
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def _load_mlp(data, part: str, activations: list[str]) -> MlpSpec:
    layers = []
    for i, act in enumerate(activations):
        layers.append(
            DenseLayer(
                weights=data[f"{part}.{i}.weights"],
                biases=data[f"{part}.{i}.biases"],
                activation=Activation(act),
            )
        )
    return MlpSpec(layers)


def load_checkpoint(path) -> HybridModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta["format"] != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {meta['format']}")
        model = HybridModel(
            kind=ModelKind(meta["kind"]),
            input_dim=meta["input_dim"],
            n_classes=meta["n_classes"],
            n_layers=meta["n_layers"],
            seed=meta["seed"],
        )
        for part, activations in meta["parts"].items():
            setattr(model, part, _load_mlp(data, part, activations))
        if "circuit" in meta:
            c = meta["circuit"]
            model.circuit = CircuitSpec(
                c["n_qubits"], c["n_layers"], data["circuit.weights"], Embedding(c["embedding"])
            )
    return model


def save_autoencoder(path, autoencoder: MlpSpec, input_dim: int, n_classes: int, seed: int | None) -> None:
    """Checkpoint a trained autoencoder (both halves) for later encoder reuse."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "kind": "autoencoder",
        "input_dim": input_dim,
        "n_classes": n_classes,
        "seed": seed,
        "activations": _mlp_meta(autoencoder),
    }
    arrays: dict[str, np.ndarray] = {}
    for i, layer in enumerate(autoencoder.layers):
        arrays[f"ae.{i}.weights"] = layer.weights
        arrays[f"ae.{i}.biases"] = layer.biases
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_autoencoder(path) -> tuple[MlpSpec, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("kind") != "autoencoder":
            raise ValueError("not an autoencoder checkpoint")
        spec = _load_mlp(data, "ae", meta["activations"])
    return spec, meta


def load_encoder(path) -> tuple[MlpSpec, dict]:
    spec, meta = load_autoencoder(path)
    return split_encoder(spec, meta["input_dim"], meta["n_classes"]), meta
