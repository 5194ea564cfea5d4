"""Differentiable dense state-vector simulation of layered Ry/CNOT classifiers.

Circuit family: an embedding (angle or amplitude), a stack of entangling
layers (linear CNOT ladder followed by per-qubit trainable Ry rotations), and
Pauli-Z expectation readout on every wire.

Conventions
-----------
* Qubit 0 is the most significant bit of the basis-state index: for two
  qubits the amplitude order is ``|00>, |01>, |10>, |11>``.
* ``Ry(a) = [[cos(a/2), -sin(a/2)], [sin(a/2), cos(a/2)]]``.
* Trainable rotation weights are stored pre-remap; the squashing map
  ``remap_weight`` is applied at gate time. Embedding angles are never
  remapped.
* Gradients are available through two backends, reverse (adjoint)
  accumulation and the +-pi/2 shift rule; both are exact on a simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels

MAX_QUBITS = 20

SHIFT = math.pi / 2
GRAD_CONSISTENCY_TOL = 1e-8


class QubitCapacityError(ValueError):
    """Qubit count or feature count exceeds what the register supports."""


class FeatureDomainError(ValueError):
    """A feature value lies outside the domain the embedding accepts."""


class NormalizationError(ValueError):
    """Feature vector cannot be normalized (zero norm)."""


class GradientConsistencyError(RuntimeError):
    """The two gradient backends disagree beyond tolerance."""


class Embedding(Enum):
    ANGLE = "angle"
    AMPLITUDE = "amplitude"


@dataclass(frozen=True)
class StateVector:
    """An ``n_qubits`` register as ``2**n_qubits`` complex amplitudes."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise QubitCapacityError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}"
            )
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class CircuitSpec:
    """Circuit shape plus its flat trainable weight vector.

    ``weights`` has length ``n_layers * n_qubits``, ordered layer-major,
    qubit-minor: entry ``l * n_qubits + q`` drives the Ry on qubit ``q`` in
    layer ``l``. ``n_layers = 0`` is allowed and means embedding + readout
    only.
    """

    n_qubits: int
    n_layers: int
    weights: np.ndarray
    embedding: Embedding

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise QubitCapacityError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}"
            )
        if self.n_layers < 0:
            raise ValueError(f"n_layers must be >= 0, got {self.n_layers}")
        w = np.asarray(self.weights, dtype=np.float64)
        expected = self.n_layers * self.n_qubits
        if w.shape != (expected,):
            raise ValueError(f"expected {expected} weights, got shape {w.shape}")
        object.__setattr__(self, "weights", w)

    def with_weights(self, weights: np.ndarray) -> "CircuitSpec":
        return CircuitSpec(self.n_qubits, self.n_layers, weights, self.embedding)


@dataclass(frozen=True)
class CircuitGradient:
    """Loss gradients with respect to circuit weights and embedded inputs."""

    d_weights: np.ndarray
    d_input: np.ndarray


def remap_weight(theta):
    """Squash a raw weight into the open interval (-pi, pi): 2*arctan(2*theta)."""
    return 2.0 * np.arctan(2.0 * np.asarray(theta, dtype=np.float64))


def remap_weight_grad(theta):
    """Derivative of ``remap_weight``: 4 / (1 + 4*theta**2)."""
    theta = np.asarray(theta, dtype=np.float64)
    return 4.0 / (1.0 + 4.0 * theta * theta)


# ---------------------------------------------------------------------------
# gate programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GateProgram:
    """Flat gate list in kernel encoding plus the angle-column layout.

    Angle columns 0..n_embed_cols-1 carry per-sample embedding angles;
    columns n_embed_cols.. carry the (broadcast) remapped trainable weights.
    """

    n_qubits: int
    kinds: np.ndarray
    pos_a: np.ndarray
    pos_b: np.ndarray
    n_embed_cols: int
    n_weight_cols: int

    @property
    def n_cols(self) -> int:
        return self.n_embed_cols + self.n_weight_cols


def _bit(n_qubits: int, qubit: int) -> int:
    return n_qubits - 1 - qubit


def _build_program(n_qubits: int, n_layers: int, n_embed_features: int) -> GateProgram:
    """Angle-embedding circuit program; pass ``n_embed_features=0`` to get the
    entangling layers alone (amplitude embedding prepares the state directly)."""
    kinds: list[int] = []
    pos_a: list[int] = []
    pos_b: list[int] = []
    col = 0
    if n_embed_features > 0:
        for q in range(n_qubits):
            kinds.append(kernels.GATE_H)
            pos_a.append(_bit(n_qubits, q))
            pos_b.append(0)
        for q in range(n_embed_features):
            kinds.append(kernels.GATE_RY)
            pos_a.append(_bit(n_qubits, q))
            pos_b.append(col)
            col += 1
    for _layer in range(n_layers):
        for q in range(n_qubits - 1):
            kinds.append(kernels.GATE_CNOT)
            pos_a.append(_bit(n_qubits, q))
            pos_b.append(_bit(n_qubits, q + 1))
        for q in range(n_qubits):
            kinds.append(kernels.GATE_RY)
            pos_a.append(_bit(n_qubits, q))
            pos_b.append(col)
            col += 1
    return GateProgram(
        n_qubits=n_qubits,
        kinds=np.asarray(kinds, dtype=np.int8),
        pos_a=np.asarray(pos_a, dtype=np.int32),
        pos_b=np.asarray(pos_b, dtype=np.int32),
        n_embed_cols=n_embed_features,
        n_weight_cols=n_layers * n_qubits,
    )


def _feature_angles(features: np.ndarray) -> np.ndarray:
    """Map [0, 1] features onto rotation angles in [-pi/2, pi/2]."""
    return features * math.pi - math.pi / 2


def _validate_angle_features(features: np.ndarray, n_qubits: int) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] > n_qubits:
        raise QubitCapacityError(
            f"{features.shape[1]} features exceed {n_qubits} qubits"
        )
    if np.any(features < 0.0) or np.any(features > 1.0):
        raise FeatureDomainError("angle-embedding features must lie in [0, 1]")
    return features


def _embed_amplitudes(features: np.ndarray) -> tuple[np.ndarray, int, np.ndarray, np.ndarray]:
    """Zero-pad to the next power of two and normalize rows to unit L2 norm.

    Returns ``(states, n_qubits, norms, padded)``.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n_features = features.shape[1]
    if n_features < 1:
        raise ValueError("amplitude embedding needs at least one feature")
    n_qubits = max(math.ceil(math.log2(n_features)), 1)
    if n_qubits > MAX_QUBITS:
        raise QubitCapacityError(f"{n_features} features need more than {MAX_QUBITS} qubits")
    dim = 1 << n_qubits
    padded = np.zeros((features.shape[0], dim), dtype=np.float64)
    padded[:, :n_features] = features
    norms = np.linalg.norm(padded, axis=1)
    if np.any(norms == 0.0):
        raise NormalizationError("cannot amplitude-embed an all-zero feature vector")
    states = (padded / norms[:, None]).astype(np.complex128)
    return states, n_qubits, norms, padded


@dataclass
class CircuitTape:
    """Everything the reverse pass needs from a batched forward pass."""

    program: GateProgram
    final_states: np.ndarray
    angles: np.ndarray
    features: np.ndarray
    unit_inputs: np.ndarray | None = None  # amplitude embedding only
    input_norms: np.ndarray | None = None


def _angle_columns(spec: CircuitSpec, program: GateProgram, features: np.ndarray) -> np.ndarray:
    batch = features.shape[0]
    cols = np.empty((batch, program.n_cols), dtype=np.float64)
    if program.n_embed_cols:
        cols[:, : program.n_embed_cols] = _feature_angles(features)
    if program.n_weight_cols:
        cols[:, program.n_embed_cols :] = remap_weight(spec.weights)[None, :]
    return cols


def circuit_forward_batch(spec: CircuitSpec, features: np.ndarray) -> tuple[np.ndarray, CircuitTape]:
    """Run the full circuit for a batch of feature rows.

    Returns the ``(B, n_qubits)`` Pauli-Z expectations and the tape for
    ``circuit_backward_batch``.
    """
    if spec.embedding is Embedding.ANGLE:
        features = _validate_angle_features(features, spec.n_qubits)
        program = _build_program(spec.n_qubits, spec.n_layers, features.shape[1])
        states = kernels.init_states(features.shape[0], spec.n_qubits)
        tape_extra = {}
    else:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        states, n_qubits, norms, padded = _embed_amplitudes(features)
        if n_qubits != spec.n_qubits:
            raise ValueError(
                f"amplitude embedding of {features.shape[1]} features needs "
                f"{n_qubits} qubits, spec has {spec.n_qubits}"
            )
        program = _build_program(spec.n_qubits, spec.n_layers, 0)
        tape_extra = {
            "unit_inputs": states.real.copy(),
            "input_norms": norms,
        }
    angles = _angle_columns(spec, program, features)
    kernels.apply_program(states, spec.n_qubits, program.kinds, program.pos_a, program.pos_b, angles)
    expectations = kernels.z_expectations(states, spec.n_qubits)
    tape = CircuitTape(program=program, final_states=states, angles=angles, features=features, **tape_extra)
    return expectations, tape


def circuit_backward_batch(
    spec: CircuitSpec,
    tape: CircuitTape,
    upstream: np.ndarray,
    need_input_grad: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Adjoint reverse pass. ``upstream`` is ``(B, n_qubits)`` dL/d<Z_q>.

    Returns ``(d_weights, d_features)``; weight gradients are summed over the
    batch, input gradients stay per-sample. ``d_features`` is None unless
    requested.
    """
    upstream = np.ascontiguousarray(np.atleast_2d(upstream), dtype=np.float64)
    program = tape.program
    d_angles, bra = kernels.adjoint_backward(
        tape.final_states,
        spec.n_qubits,
        program.kinds,
        program.pos_a,
        program.pos_b,
        tape.angles,
        upstream,
        program.n_cols,
    )
    if program.n_weight_cols:
        d_weights = d_angles[:, program.n_embed_cols :].sum(axis=0) * remap_weight_grad(spec.weights)
    else:
        d_weights = np.zeros(0, dtype=np.float64)
    d_features = None
    if need_input_grad:
        if spec.embedding is Embedding.ANGLE:
            d_features = d_angles[:, : program.n_embed_cols] * math.pi
        else:
            # chain through v = padded / ||padded||: dL/dp = (g - v (v.g)) / ||p||
            g = 2.0 * bra.real
            v = tape.unit_inputs
            vg = np.sum(v * g, axis=1, keepdims=True)
            d_padded = (g - v * vg) / tape.input_norms[:, None]
            d_features = d_padded[:, : tape.features.shape[1]]
    return d_weights, d_features


def _forward_with_angles(
    initial_states: np.ndarray, program: GateProgram, angles: np.ndarray, n_qubits: int
) -> np.ndarray:
    states = initial_states.copy()
    kernels.apply_program(states, n_qubits, program.kinds, program.pos_a, program.pos_b, angles)
    return kernels.z_expectations(states, n_qubits)


def shift_gradients_batch(
    spec: CircuitSpec,
    features: np.ndarray,
    upstream: np.ndarray,
    need_input_grad: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Parameter-shift reverse pass; same contract as ``circuit_backward_batch``.

    Each angle column is evaluated at +-pi/2; ``dE/d(angle) = (E+ - E-) / 2``.
    Under amplitude embedding the inputs are amplitudes rather than rotation
    angles, so the shift rule does not apply to them and the input gradient
    falls back to the exact adjoint chain.
    """
    upstream = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if spec.embedding is Embedding.ANGLE:
        features = _validate_angle_features(features, spec.n_qubits)
        program = _build_program(spec.n_qubits, spec.n_layers, features.shape[1])
        initial = kernels.init_states(features.shape[0], spec.n_qubits)
    else:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        initial, _, _, _ = _embed_amplitudes(features)
        program = _build_program(spec.n_qubits, spec.n_layers, 0)
    base_angles = _angle_columns(spec, program, features)

    def shifted_loss_grad(col: int) -> np.ndarray:
        angles = base_angles.copy()
        angles[:, col] = base_angles[:, col] + SHIFT
        e_plus = _forward_with_angles(initial, program, angles, spec.n_qubits)
        angles[:, col] = base_angles[:, col] - SHIFT
        e_minus = _forward_with_angles(initial, program, angles, spec.n_qubits)
        # per-sample dL/d(angle_col)
        return np.sum(upstream * (e_plus - e_minus) * 0.5, axis=1)

    d_weights = np.zeros(program.n_weight_cols, dtype=np.float64)
    for j in range(program.n_weight_cols):
        d_weights[j] = shifted_loss_grad(program.n_embed_cols + j).sum()
    if program.n_weight_cols:
        d_weights = d_weights * remap_weight_grad(spec.weights)
    d_features = None
    if need_input_grad:
        if spec.embedding is Embedding.ANGLE:
            d_features = np.empty((features.shape[0], program.n_embed_cols), dtype=np.float64)
            for j in range(program.n_embed_cols):
                d_features[:, j] = shifted_loss_grad(j) * math.pi
        else:
            _, tape = circuit_forward_batch(spec, features)
            _, d_features = circuit_backward_batch(spec, tape, upstream, need_input_grad=True)
    return d_weights, d_features


# ---------------------------------------------------------------------------
# single-state operations
# ---------------------------------------------------------------------------

def _run_single(state: StateVector, kinds, pos_a, pos_b, angles_row) -> StateVector:
    states = state.amplitudes[None, :].copy()
    angles = np.asarray(angles_row, dtype=np.float64)[None, :]
    kernels.apply_program(
        states,
        state.n_qubits,
        np.asarray(kinds, dtype=np.int8),
        np.asarray(pos_a, dtype=np.int32),
        np.asarray(pos_b, dtype=np.int32),
        angles,
    )
    return StateVector(state.n_qubits, states[0])


def init_zero_state(n_qubits: int) -> StateVector:
    """The computational basis state ``|0...0>``."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise QubitCapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    return StateVector(n_qubits, kernels.init_states(1, n_qubits)[0])


def apply_hadamard_all(state: StateVector) -> StateVector:
    """Hadamard on every qubit."""
    n = state.n_qubits
    return _run_single(
        state,
        [kernels.GATE_H] * n,
        [_bit(n, q) for q in range(n)],
        [0] * n,
        np.zeros(0),
    )


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    """Rotate one qubit around the y axis by ``angle``."""
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    return _run_single(
        state, [kernels.GATE_RY], [_bit(state.n_qubits, qubit)], [0], [float(angle)]
    )


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Flip ``target`` on the branches where ``control`` is 1."""
    n = state.n_qubits
    if control == target:
        raise ValueError("control and target must differ")
    if not (0 <= control < n and 0 <= target < n):
        raise IndexError(f"qubit indices ({control}, {target}) out of range for {n} qubits")
    return _run_single(
        state, [kernels.GATE_CNOT], [_bit(n, control)], [_bit(n, target)], np.zeros(0)
    )


def angle_embed(state: StateVector, features: np.ndarray) -> StateVector:
    """Hadamard layer, then one Ry per feature with angle ``x*pi - pi/2``.

    ``state`` must be a fresh ``|0...0>``; qubits beyond the feature count
    receive the Hadamard only.
    """
    zero = kernels.init_states(1, state.n_qubits)[0]
    if not np.array_equal(state.amplitudes, zero):
        raise ValueError("angle_embed expects a freshly initialized |0...0> state")
    features = _validate_angle_features(features, state.n_qubits)[0]
    n = state.n_qubits
    kinds = [kernels.GATE_H] * n + [kernels.GATE_RY] * len(features)
    pos_a = [_bit(n, q) for q in range(n)] + [_bit(n, q) for q in range(len(features))]
    pos_b = [0] * n + list(range(len(features)))
    return _run_single(state, kinds, pos_a, pos_b, _feature_angles(features))


def amplitude_embed(features: np.ndarray) -> StateVector:
    """Encode a feature vector as amplitudes: zero-pad to ``2**n``, unit-normalize."""
    states, n_qubits, _, _ = _embed_amplitudes(features)
    return StateVector(n_qubits, states[0])


def entangling_layers(state: StateVector, spec: CircuitSpec) -> StateVector:
    """Apply ``spec.n_layers`` repetitions of CNOT ladder + remapped Ry rotations."""
    if spec.n_qubits != state.n_qubits:
        raise ValueError("state and spec qubit counts differ")
    program = _build_program(spec.n_qubits, spec.n_layers, 0)
    return _run_single(
        state, program.kinds, program.pos_a, program.pos_b, remap_weight(spec.weights)
    )


def measure_z_all(state: StateVector) -> np.ndarray:
    """Pauli-Z expectation of every qubit, each in [-1, 1]."""
    return kernels.z_expectations(state.amplitudes[None, :], state.n_qubits)[0]


def circuit_forward(spec: CircuitSpec, features: np.ndarray) -> np.ndarray:
    """Embedding, entangling layers, and Z readout for one feature vector."""
    expectations, _ = circuit_forward_batch(spec, np.atleast_2d(features))
    return expectations[0]


def circuit_gradients(
    spec: CircuitSpec,
    features: np.ndarray,
    upstream: np.ndarray,
    method: str = "adjoint",
) -> CircuitGradient:
    """Loss gradients for one sample given ``upstream = dL/d<Z_q>``.

    ``method`` selects the backend: ``"adjoint"`` (reverse accumulation,
    default), ``"parameter-shift"``, or ``"selftest"`` which runs both and
    raises :class:`GradientConsistencyError` if any component differs by more
    than ``1e-8``.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if upstream.shape[1] != spec.n_qubits:
        raise ValueError(
            f"upstream must have length {spec.n_qubits}, got {upstream.shape[1]}"
        )

    def adjoint() -> CircuitGradient:
        _, tape = circuit_forward_batch(spec, features)
        d_w, d_x = circuit_backward_batch(spec, tape, upstream, need_input_grad=True)
        return CircuitGradient(d_w, d_x[0])

    def shift() -> CircuitGradient:
        d_w, d_x = shift_gradients_batch(spec, features, upstream, need_input_grad=True)
        return CircuitGradient(d_w, d_x[0])

    if method == "adjoint":
        return adjoint()
    if method == "parameter-shift":
        return shift()
    if method == "selftest":
        a = adjoint()
        s = shift()
        dw_err = float(np.max(np.abs(a.d_weights - s.d_weights), initial=0.0))
        dx_err = float(np.max(np.abs(a.d_input - s.d_input), initial=0.0))
        if max(dw_err, dx_err) > GRAD_CONSISTENCY_TOL:
            raise GradientConsistencyError(
                f"adjoint and parameter-shift gradients differ: "
                f"max weight error {dw_err:.3e}, max input error {dx_err:.3e}"
            )
        return a
    raise ValueError(f"unknown gradient method {method!r}")
