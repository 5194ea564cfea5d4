"""Batched state-vector gate kernels.

A circuit is compiled into a flat gate program (parallel arrays of opcodes and
operands) that a single kernel call executes over a batch of state vectors.
Two interchangeable implementations exist:

* ``numba`` -- ``@njit``-compiled loops, the default whenever numba imports.
* ``numpy`` -- vectorized reshape/broadcast fallback, always available.

The active implementation is chosen once at import time from the environment
variable ``HQB_KERNELS`` (``numba`` or ``numpy``). Both paths are
single-threaded and deterministic; ``benchmarks/kernel_bench.py`` compares
their throughput.

State layout: a batch is a ``(B, 2**n)`` complex128 array. Qubit ``q`` of an
``n``-qubit register occupies bit position ``n - 1 - q`` of the basis index
(qubit 0 is the most significant bit). Gate programs address bit positions,
not qubit indices; the translation happens when the program is built.

Program encoding, per gate g:
    kinds[g]  -- GATE_H | GATE_RY | GATE_CNOT
    pos_a[g]  -- target bit position (H, RY) or control bit position (CNOT)
    pos_b[g]  -- angle column index (RY) or target bit position (CNOT)
RY angles are per-sample: column ``pos_b[g]`` of the ``(B, n_cols)`` angle
matrix supplied alongside the program.
"""

from __future__ import annotations

import os

import numpy as np

GATE_H = 0
GATE_RY = 1
GATE_CNOT = 2

_INV_SQRT2 = 0.7071067811865475


# ---------------------------------------------------------------------------
# numpy implementation
# ---------------------------------------------------------------------------

def _pair_view(states: np.ndarray, pos: int) -> np.ndarray:
    """Reshape so axis 2 indexes the value of bit ``pos``."""
    batch, dim = states.shape
    return states.reshape(batch, dim >> (pos + 1), 2, 1 << pos)


def _h_numpy(states: np.ndarray, pos: int) -> None:
    view = _pair_view(states, pos)
    lo = view[:, :, 0, :]
    hi = view[:, :, 1, :]
    t = (lo + hi) * _INV_SQRT2
    u = (lo - hi) * _INV_SQRT2
    lo[...] = t
    hi[...] = u


def _ry_numpy(states: np.ndarray, pos: int, angles: np.ndarray) -> None:
    half = 0.5 * angles
    c = np.cos(half)[:, None, None]
    s = np.sin(half)[:, None, None]
    view = _pair_view(states, pos)
    lo = view[:, :, 0, :]
    hi = view[:, :, 1, :]
    t = c * lo - s * hi
    u = s * lo + c * hi
    lo[...] = t
    hi[...] = u


def _cnot_numpy(states: np.ndarray, control_pos: int, target_pos: int) -> None:
    batch, dim = states.shape
    hi_pos = max(control_pos, target_pos)
    lo_pos = min(control_pos, target_pos)
    view = states.reshape(
        batch,
        dim >> (hi_pos + 1),
        2,
        (1 << hi_pos) >> (lo_pos + 1),
        2,
        1 << lo_pos,
    )
    if control_pos == hi_pos:
        a = view[:, :, 1, :, 0, :]
        b = view[:, :, 1, :, 1, :]
    else:
        a = view[:, :, 0, :, 1, :]
        b = view[:, :, 1, :, 1, :]
    t = a.copy()
    a[...] = b
    b[...] = t


def apply_program_numpy(
    states: np.ndarray,
    n_qubits: int,
    kinds: np.ndarray,
    pos_a: np.ndarray,
    pos_b: np.ndarray,
    angles: np.ndarray,
) -> None:
    """Run a gate program over the batch, mutating ``states`` in place."""
    for g in range(kinds.shape[0]):
        kind = kinds[g]
        if kind == GATE_H:
            _h_numpy(states, pos_a[g])
        elif kind == GATE_RY:
            _ry_numpy(states, pos_a[g], angles[:, pos_b[g]])
        else:
            _cnot_numpy(states, pos_a[g], pos_b[g])


def z_expectations_numpy(states: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-wire Pauli-Z expectations, shape ``(B, n_qubits)``."""
    probs = states.real * states.real + states.imag * states.imag
    out = np.empty((states.shape[0], n_qubits), dtype=np.float64)
    for q in range(n_qubits):
        pos = n_qubits - 1 - q
        view = probs.reshape(probs.shape[0], probs.shape[1] >> (pos + 1), 2, 1 << pos)
        out[:, q] = view[:, :, 0, :].sum(axis=(1, 2)) - view[:, :, 1, :].sum(axis=(1, 2))
    return out


def _weighted_z_numpy(states: np.ndarray, n_qubits: int, upstream: np.ndarray) -> np.ndarray:
    """Apply the upstream-weighted sum of Z observables: sum_q u[b,q] Z_q |psi_b>."""
    dim = states.shape[1]
    idx = np.arange(dim)
    weight = np.zeros((states.shape[0], dim), dtype=np.float64)
    for q in range(n_qubits):
        sign = 1.0 - 2.0 * ((idx >> (n_qubits - 1 - q)) & 1)
        weight += upstream[:, q : q + 1] * sign[None, :]
    return states * weight


def adjoint_backward_numpy(
    states: np.ndarray,
    n_qubits: int,
    kinds: np.ndarray,
    pos_a: np.ndarray,
    pos_b: np.ndarray,
    angles: np.ndarray,
    upstream: np.ndarray,
    n_cols: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse pass through a gate program.

    ``states`` is the batch AFTER the full program ran (it is not modified).
    Returns ``(d_angles, bra)`` where ``d_angles[b, c]`` is the derivative of
    ``sum_q upstream[b, q] * <Z_q>`` for sample ``b`` with respect to angle
    column ``c``, and ``bra`` is the weighted observable state pulled back to
    the circuit input (used for amplitude-embedding input gradients).
    """
    ket = states.copy()
    bra = _weighted_z_numpy(states, n_qubits, upstream)
    d_angles = np.zeros((states.shape[0], n_cols), dtype=np.float64)
    for g in range(kinds.shape[0] - 1, -1, -1):
        kind = kinds[g]
        if kind == GATE_H:
            _h_numpy(ket, pos_a[g])
            _h_numpy(bra, pos_a[g])
        elif kind == GATE_CNOT:
            _cnot_numpy(ket, pos_a[g], pos_b[g])
            _cnot_numpy(bra, pos_a[g], pos_b[g])
        else:
            col = pos_b[g]
            _ry_numpy(ket, pos_a[g], -angles[:, col])
            half = 0.5 * angles[:, col]
            c = np.cos(half)[:, None, None]
            s = np.sin(half)[:, None, None]
            view = _pair_view(ket, pos_a[g])
            k0 = view[:, :, 0, :]
            k1 = view[:, :, 1, :]
            d0 = 0.5 * (-s * k0 - c * k1)
            d1 = 0.5 * (c * k0 - s * k1)
            bview = _pair_view(bra, pos_a[g])
            acc = np.conj(bview[:, :, 0, :]) * d0 + np.conj(bview[:, :, 1, :]) * d1
            d_angles[:, col] += 2.0 * acc.real.sum(axis=(1, 2))
            _ry_numpy(bra, pos_a[g], -angles[:, col])
    return d_angles, bra


# ---------------------------------------------------------------------------
# numba implementation
# ---------------------------------------------------------------------------

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

if HAS_NUMBA:

    @njit(cache=True)
    def _apply_program_jit(states, n_qubits, kinds, pos_a, pos_b, angles):
        batch, dim = states.shape
        half_dim = dim >> 1
        for g in range(kinds.shape[0]):
            kind = kinds[g]
            if kind == GATE_H:
                stride = 1 << pos_a[g]
                mask = stride - 1
                for b in range(batch):
                    for i in range(half_dim):
                        i0 = ((i & ~mask) << 1) | (i & mask)
                        i1 = i0 | stride
                        t = states[b, i0]
                        u = states[b, i1]
                        states[b, i0] = (t + u) * _INV_SQRT2
                        states[b, i1] = (t - u) * _INV_SQRT2
            elif kind == GATE_RY:
                stride = 1 << pos_a[g]
                mask = stride - 1
                col = pos_b[g]
                for b in range(batch):
                    half = 0.5 * angles[b, col]
                    c = np.cos(half)
                    s = np.sin(half)
                    for i in range(half_dim):
                        i0 = ((i & ~mask) << 1) | (i & mask)
                        i1 = i0 | stride
                        t = states[b, i0]
                        u = states[b, i1]
                        states[b, i0] = c * t - s * u
                        states[b, i1] = s * t + c * u
            else:
                c_mask = 1 << pos_a[g]
                t_mask = 1 << pos_b[g]
                for b in range(batch):
                    for i in range(dim):
                        if (i & c_mask) != 0 and (i & t_mask) == 0:
                            j = i | t_mask
                            t = states[b, i]
                            states[b, i] = states[b, j]
                            states[b, j] = t

    @njit(cache=True)
    def _z_expectations_jit(states, n_qubits):
        batch, dim = states.shape
        out = np.zeros((batch, n_qubits), dtype=np.float64)
        for b in range(batch):
            for i in range(dim):
                v = states[b, i]
                p = v.real * v.real + v.imag * v.imag
                for q in range(n_qubits):
                    if (i >> (n_qubits - 1 - q)) & 1:
                        out[b, q] -= p
                    else:
                        out[b, q] += p
        return out

    @njit(cache=True)
    def _adjoint_backward_jit(states, n_qubits, kinds, pos_a, pos_b, angles, upstream, n_cols):
        batch, dim = states.shape
        half_dim = dim >> 1
        ket = states.copy()
        bra = np.empty_like(states)
        for b in range(batch):
            for i in range(dim):
                w = 0.0
                for q in range(n_qubits):
                    if (i >> (n_qubits - 1 - q)) & 1:
                        w -= upstream[b, q]
                    else:
                        w += upstream[b, q]
                bra[b, i] = states[b, i] * w
        d_angles = np.zeros((batch, n_cols), dtype=np.float64)
        for g in range(kinds.shape[0] - 1, -1, -1):
            kind = kinds[g]
            if kind == GATE_H:
                stride = 1 << pos_a[g]
                mask = stride - 1
                for b in range(batch):
                    for i in range(half_dim):
                        i0 = ((i & ~mask) << 1) | (i & mask)
                        i1 = i0 | stride
                        t = ket[b, i0]
                        u = ket[b, i1]
                        ket[b, i0] = (t + u) * _INV_SQRT2
                        ket[b, i1] = (t - u) * _INV_SQRT2
                        t = bra[b, i0]
                        u = bra[b, i1]
                        bra[b, i0] = (t + u) * _INV_SQRT2
                        bra[b, i1] = (t - u) * _INV_SQRT2
            elif kind == GATE_CNOT:
                c_mask = 1 << pos_a[g]
                t_mask = 1 << pos_b[g]
                for b in range(batch):
                    for i in range(dim):
                        if (i & c_mask) != 0 and (i & t_mask) == 0:
                            j = i | t_mask
                            t = ket[b, i]
                            ket[b, i] = ket[b, j]
                            ket[b, j] = t
                            t = bra[b, i]
                            bra[b, i] = bra[b, j]
                            bra[b, j] = t
            else:
                stride = 1 << pos_a[g]
                mask = stride - 1
                col = pos_b[g]
                for b in range(batch):
                    half = 0.5 * angles[b, col]
                    c = np.cos(half)
                    s = np.sin(half)
                    acc = 0.0
                    for i in range(half_dim):
                        i0 = ((i & ~mask) << 1) | (i & mask)
                        i1 = i0 | stride
                        # undo the rotation on the ket (multiply by Ry(-a))
                        t = ket[b, i0]
                        u = ket[b, i1]
                        k0 = c * t + s * u
                        k1 = -s * t + c * u
                        ket[b, i0] = k0
                        ket[b, i1] = k1
                        # derivative gate on the pre-rotation ket
                        d0 = 0.5 * (-s * k0 - c * k1)
                        d1 = 0.5 * (c * k0 - s * k1)
                        b0 = bra[b, i0]
                        b1 = bra[b, i1]
                        acc += 2.0 * (
                            b0.real * d0.real + b0.imag * d0.imag
                            + b1.real * d1.real + b1.imag * d1.imag
                        )
                        bra[b, i0] = c * b0 + s * b1
                        bra[b, i1] = -s * b0 + c * b1
                    d_angles[b, col] += acc
        return d_angles, bra

    def apply_program_numba(states, n_qubits, kinds, pos_a, pos_b, angles):
        _apply_program_jit(states, n_qubits, kinds, pos_a, pos_b, angles)

    def z_expectations_numba(states, n_qubits):
        return _z_expectations_jit(states, n_qubits)

    def adjoint_backward_numba(states, n_qubits, kinds, pos_a, pos_b, angles, upstream, n_cols):
        return _adjoint_backward_jit(states, n_qubits, kinds, pos_a, pos_b, angles, upstream, n_cols)

else:  # pragma: no cover - exercised only without numba
    apply_program_numba = None
    z_expectations_numba = None
    adjoint_backward_numba = None


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _select_backend() -> str:
    requested = os.environ.get("HQB_KERNELS", "").strip().lower()
    if requested == "":
        return "numba" if HAS_NUMBA else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"HQB_KERNELS must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAS_NUMBA:
        raise ImportError("HQB_KERNELS=numba but numba is not installed")
    return requested


BACKEND = _select_backend()

if BACKEND == "numba":
    apply_program = apply_program_numba
    z_expectations = z_expectations_numba
    adjoint_backward = adjoint_backward_numba
else:
    apply_program = apply_program_numpy
    z_expectations = z_expectations_numpy
    adjoint_backward = adjoint_backward_numpy


def active_backend() -> str:
    """Name of the kernel implementation selected at import time."""
    return BACKEND


def init_states(batch: int, n_qubits: int) -> np.ndarray:
    """Batch of ``|0...0>`` states, shape ``(batch, 2**n_qubits)``."""
    states = np.zeros((batch, 1 << n_qubits), dtype=np.complex128)
    states[:, 0] = 1.0
    return states
