"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``MEASOPT_DISABLE_NUMBA`` is unset (or set to a false-like value).
Both paths are always importable so they can be cross-checked and
benchmarked against each other.

Qubit ``q`` of an ``n``-qubit register maps to bit ``n - 1 - q`` of a basis
index, i.e. qubit 0 is the most significant bit (leftmost tensor factor).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _flag_set(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _flag_set("MEASOPT_DISABLE_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Superoperator application on a dense density matrix
# ---------------------------------------------------------------------------


def apply_superop_numpy(rho: np.ndarray, sop: np.ndarray, qubits) -> np.ndarray:
    """Apply a ``4**k x 4**k`` superoperator to ``k`` qubits of ``rho``.

    ``sop`` acts on the row-major vectorization of the ``2**k x 2**k``
    sub-block, so a unitary ``U`` corresponds to ``kron(U, U.conj())`` and a
    Kraus set to the sum of ``kron(K, K.conj())``.
    """
    d = rho.shape[0]
    n = d.bit_length() - 1
    k = len(qubits)
    t = rho.reshape((2,) * (2 * n))
    s = sop.reshape((2,) * (4 * k))
    row_axes = [int(q) for q in qubits]
    col_axes = [n + int(q) for q in qubits]
    res = np.tensordot(s, t, axes=(list(range(2 * k, 4 * k)), row_axes + col_axes))
    res = np.moveaxis(res, list(range(2 * k)), row_axes + col_axes)
    return np.ascontiguousarray(res).reshape(d, d)


def _apply_superop_loops(rho, rows, cols, vals, bitpos):
    # Sparse superoperator: only (rows[t], cols[t], vals[t]) entries are nonzero.
    d = rho.shape[0]
    k = bitpos.shape[0]
    m = 1 << k
    off = np.zeros(m, np.int64)
    for a in range(m):
        o = 0
        for i in range(k):
            if (a >> (k - 1 - i)) & 1:
                o |= 1 << bitpos[i]
        off[a] = o
    mask = 0
    for i in range(k):
        mask |= 1 << bitpos[i]
    nnz = rows.shape[0]
    dst_r = np.empty(nnz, np.int64)
    dst_c = np.empty(nnz, np.int64)
    src_r = np.empty(nnz, np.int64)
    src_c = np.empty(nnz, np.int64)
    for t in range(nnz):
        dst_r[t] = off[rows[t] // m]
        dst_c[t] = off[rows[t] % m]
        src_r[t] = off[cols[t] // m]
        src_c[t] = off[cols[t] % m]
    bases = np.empty(d // m, np.int64)
    nb = 0
    for i in range(d):
        if not i & mask:
            bases[nb] = i
            nb += 1
    out = np.zeros_like(rho)
    for bi in range(nb):
        r0 = bases[bi]
        for bj in range(nb):
            c0 = bases[bj]
            for t in range(nnz):
                out[r0 | dst_r[t], c0 | dst_c[t]] += vals[t] * rho[r0 | src_r[t], c0 | src_c[t]]
    return out


if HAVE_NUMBA:
    _apply_superop_nb = numba.njit(cache=True)(_apply_superop_loops)
else:  # pragma: no cover
    _apply_superop_nb = _apply_superop_loops


def apply_superop_numba(rho: np.ndarray, sop: np.ndarray, qubits) -> np.ndarray:
    n = rho.shape[0].bit_length() - 1
    bitpos = np.array([n - 1 - int(q) for q in qubits], dtype=np.int64)
    sop = np.asarray(sop, dtype=np.complex128)
    rows, cols = np.nonzero(sop)
    return _apply_superop_nb(
        np.ascontiguousarray(rho, dtype=np.complex128),
        rows.astype(np.int64),
        cols.astype(np.int64),
        np.ascontiguousarray(sop[rows, cols]),
        bitpos,
    )


# ---------------------------------------------------------------------------
# Pairwise symplectic relations between two stacks of Pauli strings
# ---------------------------------------------------------------------------


def pair_relations_numpy(x1, z1, x2, z2):
    """Return ``(anticommute, qwc_conflict)`` boolean matrices.

    ``anticommute[i, j]`` is the symplectic parity of row ``i`` of the first
    stack against row ``j`` of the second; ``qwc_conflict[i, j]`` is set when
    some single position anticommutes locally.
    """
    x1 = np.asarray(x1, dtype=np.uint8)
    z1 = np.asarray(z1, dtype=np.uint8)
    x2 = np.asarray(x2, dtype=np.uint8)
    z2 = np.asarray(z2, dtype=np.uint8)
    local = (x1[:, None, :] & z2[None, :, :]) ^ (z1[:, None, :] & x2[None, :, :])
    parity = local.sum(axis=2, dtype=np.int64) & 1
    return parity.astype(bool), local.any(axis=2)


def _pair_relations_loops(x1, z1, x2, z2):
    m1, n = x1.shape
    m2 = x2.shape[0]
    anti = np.zeros((m1, m2), dtype=np.bool_)
    conflict = np.zeros((m1, m2), dtype=np.bool_)
    for i in range(m1):
        for j in range(m2):
            par = 0
            hit = False
            for q in range(n):
                loc = (x1[i, q] & z2[j, q]) ^ (z1[i, q] & x2[j, q])
                par ^= loc
                if loc:
                    hit = True
            anti[i, j] = par == 1
            conflict[i, j] = hit
    return anti, conflict


if HAVE_NUMBA:
    _pair_relations_nb = numba.njit(cache=True)(_pair_relations_loops)
else:  # pragma: no cover
    _pair_relations_nb = _pair_relations_loops


def pair_relations_numba(x1, z1, x2, z2):
    return _pair_relations_nb(
        np.ascontiguousarray(x1, dtype=np.uint8),
        np.ascontiguousarray(z1, dtype=np.uint8),
        np.ascontiguousarray(x2, dtype=np.uint8),
        np.ascontiguousarray(z2, dtype=np.uint8),
    )


if USE_NUMBA:
    apply_superop = apply_superop_numba
    pair_relations = pair_relations_numba
else:
    apply_superop = apply_superop_numpy
    pair_relations = pair_relations_numpy
