"""Time the numba and numpy paths of the hot kernels side by side.

Usage: python3 benchmarks/bench_kernels.py [--qubits 4 6 8] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from measopt import _kernels
from measopt.circuits import make_gate
from measopt.simulator import depolarizing_kraus, gate_matrix, kraus_superop, random_pure_state, unitary_superop


def bench_superop(n: int, repeat: int, sop: np.ndarray) -> dict:
    rho = np.array(random_pure_state(n, 0).data)
    qubits = (0, n - 1)
    _kernels.apply_superop_numba(rho, sop, qubits)  # compile outside the timer
    out = {}
    for name, fn in (("numpy", _kernels.apply_superop_numpy), ("numba", _kernels.apply_superop_numba)):
        t = timeit.Timer(lambda: fn(rho, sop, qubits))
        loops, _ = t.autorange()
        out[name] = min(t.repeat(repeat, loops)) / loops
    return out


def bench_pairs(count: int, n: int, repeat: int) -> dict:
    rng = np.random.default_rng(0)
    x, z = rng.integers(0, 2, (2, count, n), dtype=np.uint8)
    _kernels.pair_relations_numba(x, z, x, z)
    out = {}
    for name, fn in (("numpy", _kernels.pair_relations_numpy), ("numba", _kernels.pair_relations_numba)):
        t = timeit.Timer(lambda: fn(x, z, x, z))
        loops, _ = t.autorange()
        out[name] = min(t.repeat(repeat, loops)) / loops
    return out


def main(argv=None) -> list[str]:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--qubits", type=int, nargs="+", default=[4, 6, 8])
    parser.add_argument("--terms", type=int, nargs="+", default=[100, 400])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    lines = [f"{'kernel':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}"]
    depol = kraus_superop(depolarizing_kraus(0.01, 2))
    cnot = unitary_superop(gate_matrix(make_gate("CNOT", 0, 1)))
    rows = [(f"2q depolarizing, {n}q", bench_superop(n, args.repeat, depol)) for n in args.qubits]
    rows += [(f"CNOT unitary, {n}q", bench_superop(n, args.repeat, cnot)) for n in args.qubits]
    rows += [(f"pair relations, {m} x 12q", bench_pairs(m, 12, args.repeat)) for m in args.terms]
    for label, t in rows:
        lines.append(
            f"{label:<28}{t['numpy'] * 1e6:>10.1f}us{t['numba'] * 1e6:>10.1f}us{t['numpy'] / t['numba']:>9.2f}x"
        )
    print("\n".join(lines))
    return lines


if __name__ == "__main__":
    main()
