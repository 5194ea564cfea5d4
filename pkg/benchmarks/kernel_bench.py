#!/usr/bin/env python3
"""Benchmark the numba gate kernels against the pure-numpy fallback.

Times forward circuit execution and the adjoint reverse pass across register
sizes, on the batched layered Ry/CNOT circuits the training loops run.

Usage:
    python benchmarks/kernel_bench.py [--qubits 2 5 10] [--layers 6]
                                      [--batch 5] [--repeats 200]
"""

import argparse
import time

import numpy as np

import hqb.kernels as K
from hqb.quantum import CircuitSpec, Embedding, _angle_columns, _build_program


def build_case(n_qubits: int, n_layers: int, batch: int, rng):
    spec = CircuitSpec(
        n_qubits, n_layers, rng.uniform(-1, 1, n_qubits * n_layers), Embedding.ANGLE
    )
    program = _build_program(n_qubits, n_layers, n_qubits)
    features = rng.uniform(0, 1, (batch, n_qubits))
    angles = _angle_columns(spec, program, features)
    upstream = rng.normal(size=(batch, n_qubits))
    return program, angles, upstream


def time_backend(apply_fn, adjoint_fn, program, angles, upstream, batch, repeats):
    n = program.n_qubits
    # warm up (numba JIT compiles on first call)
    states = K.init_states(batch, n)
    apply_fn(states, n, program.kinds, program.pos_a, program.pos_b, angles)
    adjoint_fn(states, n, program.kinds, program.pos_a, program.pos_b, angles, upstream, program.n_cols)

    t0 = time.perf_counter()
    for _ in range(repeats):
        states = K.init_states(batch, n)
        apply_fn(states, n, program.kinds, program.pos_a, program.pos_b, angles)
    forward = (time.perf_counter() - t0) / repeats

    t0 = time.perf_counter()
    for _ in range(repeats):
        adjoint_fn(states, n, program.kinds, program.pos_a, program.pos_b, angles, upstream, program.n_cols)
    backward = (time.perf_counter() - t0) / repeats
    return forward, backward


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--qubits", type=int, nargs="+", default=[2, 5, 10])
    parser.add_argument("--layers", type=int, default=6)
    parser.add_argument("--batch", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    backends = [("numpy", K.apply_program_numpy, K.adjoint_backward_numpy)]
    if K.HAS_NUMBA:
        backends.append(("numba", K.apply_program_numba, K.adjoint_backward_numba))
    else:
        print("numba not installed; benchmarking the numpy path only")

    rng = np.random.default_rng(0)
    print(f"batch={args.batch} layers={args.layers} repeats={args.repeats}")
    header = f"{'qubits':>6} | " + " | ".join(
        f"{name + ' fwd':>12} {name + ' bwd':>12}" for name, _, _ in backends
    )
    print(header)
    print("-" * len(header))
    for n in args.qubits:
        program, angles, upstream = build_case(n, args.layers, args.batch, rng)
        cells = []
        times = {}
        for name, apply_fn, adjoint_fn in backends:
            fwd, bwd = time_backend(
                apply_fn, adjoint_fn, program, angles, upstream, args.batch, args.repeats
            )
            times[name] = (fwd, bwd)
            cells.append(f"{fwd * 1e6:>10.1f}us {bwd * 1e6:>10.1f}us")
        line = f"{n:>6} | " + " | ".join(cells)
        if len(backends) == 2:
            speedup = times["numpy"][0] / times["numba"][0]
            line += f"   (numba {speedup:.1f}x on forward)"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
