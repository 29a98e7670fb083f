import os
import subprocess
import sys

import numpy as np
import pytest

from measopt import _kernels
from measopt.simulator import DensityMatrix, depolarizing_kraus, kraus_superop
from oracles import embed_1q, haar_vector, two_qubit


def random_superop(k, rng):
    ops = depolarizing_kraus(0.3, k)
    u = np.linalg.qr(rng.normal(size=(2**k, 2**k)) + 1j * rng.normal(size=(2**k, 2**k)))[0]
    return kraus_superop([u @ K for K in ops])


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("n", [2, 3, 5])
def test_superop_paths_agree(k, n, rng):
    for _ in range(5):
        rho = DensityMatrix.from_vector(haar_vector(n, rng)).data
        qubits = tuple(int(q) for q in rng.choice(n, k, replace=False))
        sop = random_superop(k, rng)
        a = _kernels.apply_superop_numpy(rho, sop, qubits)
        b = _kernels.apply_superop_numba(rho, sop, qubits)
        assert np.allclose(a, b, atol=1e-13)


def test_superop_matches_dense_unitary(rng):
    n = 3
    rho = DensityMatrix.from_vector(haar_vector(n, rng)).data
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    for fn in (_kernels.apply_superop_numpy, _kernels.apply_superop_numba):
        out = fn(rho, np.kron(h, h.conj()), (1,))
        u = embed_1q(h, 1, n)
        assert np.allclose(out, u @ rho @ u.conj().T)
        cnot = two_qubit("CNOT", 2, 0, n)
        sub = two_qubit("CNOT", 0, 1, 2)
        out = fn(rho, np.kron(sub, sub.conj()), (2, 0))
        assert np.allclose(out, cnot @ rho @ cnot.conj().T)


def test_pair_relations_agree(rng):
    for _ in range(20):
        n = int(rng.integers(1, 9))
        x1, z1 = rng.integers(0, 2, (2, 7, n), dtype=np.uint8)
        x2, z2 = rng.integers(0, 2, (2, 5, n), dtype=np.uint8)
        a = _kernels.pair_relations_numpy(x1, z1, x2, z2)
        b = _kernels.pair_relations_numba(x1, z1, x2, z2)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("value,expected", [("1", "numpy"), ("true", "numpy"), ("0", None), ("", None)])
def test_env_flag_selects_backend(value, expected):
    env = dict(os.environ, MEASOPT_DISABLE_NUMBA=value)
    res = subprocess.run(
        [sys.executable, "-c", "import measopt; print(measopt.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    want = expected or ("numba" if _kernels.HAVE_NUMBA else "numpy")
    assert res.stdout.strip() == want


def test_benchmark_runs():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    res = subprocess.run(
        [sys.executable, os.path.join(root, "benchmarks", "bench_kernels.py"), "--qubits", "3", "--terms", "10", "--repeat", "1"],
        capture_output=True, text=True, check=True,
    )
    assert "CNOT unitary" in res.stdout and "pair relations" in res.stdout
