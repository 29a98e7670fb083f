"""Exact dense density-matrix simulation with depolarizing and thermal noise."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .circuits import Circuit, Gate, RoutedCircuit
from .device import NoiseParameters
from .errors import CapacityError, DimensionError, InputError, NumericalError, StateError
from .pauli import PauliString

MAX_QUBITS = 10
TOL = 1e-9
PURITY_TOL = 1e-10


class DensityMatrix:
    """Immutable ``2**n x 2**n`` density matrix."""

    __slots__ = ("_data", "num_qubits")

    def __init__(self, data, validate: bool = True):
        data = np.array(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError("density matrix must be square")
        d = data.shape[0]
        n = d.bit_length() - 1
        if d != 1 << n or n < 1:
            raise DimensionError(f"dimension {d} is not a power of two")
        if n > MAX_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the dense-simulation cap of {MAX_QUBITS}")
        data.setflags(write=False)
        self._data = data
        self.num_qubits = n
        if validate:
            self.validate()

    @classmethod
    def from_vector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def zero_state(cls, num_qubits: int) -> "DensityMatrix":
        _check_capacity(num_qubits)
        d = 2**num_qubits
        data = np.zeros((d, d), dtype=np.complex128)
        data[0, 0] = 1
        return cls(data, validate=False)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        _check_capacity(num_qubits)
        d = 2**num_qubits
        return cls(np.eye(d, dtype=np.complex128) / d, validate=False)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self._data).real)

    def purity(self) -> float:
        return float(np.vdot(self._data, self._data).real)

    def validate(self, tol: float = TOL) -> None:
        rho = self._data
        if np.abs(rho - rho.conj().T).max() > tol:
            raise NumericalError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > tol:
            raise NumericalError(f"density matrix trace is {np.trace(rho).real}, not 1")
        if np.linalg.eigvalsh(rho).min() < -tol:
            raise NumericalError("density matrix has a negative eigenvalue")


def _check_capacity(n: int) -> None:
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the dense-simulation cap of {MAX_QUBITS}")


# ---------------------------------------------------------------------------
# Gate matrices and channels
# ---------------------------------------------------------------------------

_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.diag([1, 1j]).astype(complex),
    "SDG": np.diag([1, -1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_PAULI_1Q = [
    np.eye(2, dtype=complex),
    _FIXED["X"],
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    _FIXED["Z"],
]


def gate_matrix(gate: Gate) -> np.ndarray:
    if gate.name in _FIXED:
        return _FIXED[gate.name]
    c, s = math.cos(gate.param / 2), math.sin(gate.param / 2)
    if gate.name == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if gate.name == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.name == "RZ":
        return np.diag([c - 1j * s, c + 1j * s])
    raise InputError(f"no matrix for gate {gate.name}")


def unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def kraus_superop(kraus: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k, k.conj()) for k in kraus)


def depolarizing_kraus(p: float, num_qubits: int = 1) -> list[np.ndarray]:
    """Kraus operators of ``rho -> (1-p) rho + p I/2^k (x) Tr_k rho`` on ``k`` qubits."""
    if not 0 <= p <= 1:
        raise InputError(f"depolarizing probability {p} out of range")
    d2 = 4**num_qubits
    ops = []
    for idx in itertools.product(range(4), repeat=num_qubits):
        mat = np.ones((1, 1), dtype=complex)
        for i in idx:
            mat = np.kron(mat, _PAULI_1Q[i])
        weight = 1 - p * (d2 - 1) / d2 if not any(idx) else p / d2
        ops.append(math.sqrt(weight) * mat)
    return ops


def thermal_relaxation_kraus(duration: float, t1: float, t2: float) -> list[np.ndarray]:
    """Amplitude damping (``T1``) followed by extra dephasing so coherences decay as ``exp(-t/T2)``."""
    if t2 > 2 * t1 * (1 + 1e-12):
        raise InputError("thermal relaxation needs T2 <= 2 T1")
    gamma = 1 - math.exp(-duration / t1)
    amp = [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]
    f = min(1.0, math.exp(-duration / t2 + duration / (2 * t1)))
    phase = [
        math.sqrt((1 + f) / 2) * np.eye(2, dtype=complex),
        math.sqrt((1 - f) / 2) * _FIXED["Z"],
    ]
    return [b @ a for b in phase for a in amp]


@lru_cache(maxsize=256)
def _depol_superop(p: float, k: int) -> np.ndarray:
    return kraus_superop(depolarizing_kraus(p, k))


@lru_cache(maxsize=256)
def _thermal_superop(duration: float, t1: float, t2: float) -> np.ndarray:
    return kraus_superop(thermal_relaxation_kraus(duration, t1, t2))


@dataclass(frozen=True)
class NoiseChannelSpec:
    """Per-gate noise recipe.

    ``depolarizing`` is ``"none"``, ``"global"`` (one register-wide
    depolarizing event per gate with the gate's probability) or ``"local"``
    (depolarizing on the gate's operands). With ``thermal`` set, every qubit
    relaxes for the gate's duration after each gate.
    """

    depolarizing: str = "none"
    p_1q: float = 0.0
    p_2q: float = 0.0
    thermal: bool = False
    t1_us: float = math.inf
    t2_us: float = math.inf
    t_1q_us: float = 0.0
    t_2q_us: float = 0.0

    def __post_init__(self):
        if self.depolarizing not in ("none", "global", "local"):
            raise InputError(f"unknown depolarizing mode {self.depolarizing!r}")
        if self.thermal and not (math.isfinite(self.t1_us) and math.isfinite(self.t2_us)):
            raise InputError("thermal noise needs finite T1 and T2")

    @classmethod
    def ideal(cls) -> "NoiseChannelSpec":
        return cls()

    @classmethod
    def validation(cls, p_2q: float) -> "NoiseChannelSpec":
        """Global two-qubit depolarizing only: the analytic model's exact setting."""
        return cls(depolarizing="global", p_2q=p_2q)

    @classmethod
    def device(cls, noise: NoiseParameters) -> "NoiseChannelSpec":
        return cls(
            depolarizing="local",
            p_1q=noise.p_1q,
            p_2q=noise.p_2q,
            thermal=True,
            t1_us=noise.t1_us,
            t2_us=noise.t2_us,
            t_1q_us=noise.t_1q_us,
            t_2q_us=noise.t_2q_us,
        )

    @classmethod
    def from_mode(cls, mode: str, noise: NoiseParameters | None) -> "NoiseChannelSpec":
        if mode == "ideal":
            return cls.ideal()
        if noise is None:
            raise InputError(f"noise mode {mode!r} needs device noise parameters")
        if mode == "validation":
            return cls.validation(noise.p_2q)
        if mode == "device":
            return cls.device(noise)
        raise InputError(f"unknown noise mode {mode!r}; choose ideal, validation or device")

    @property
    def is_ideal(self) -> bool:
        no_depol = self.depolarizing == "none" or (self.p_1q == 0 and self.p_2q == 0)
        return no_depol and not self.thermal

    def kraus_sets(self) -> dict[str, list[np.ndarray]]:
        """Kraus sets for the local channels these settings apply."""
        out = {}
        if self.depolarizing == "local":
            out["depolarizing_1q"] = depolarizing_kraus(self.p_1q, 1)
            out["depolarizing_2q"] = depolarizing_kraus(self.p_2q, 2)
        if self.thermal:
            out["thermal_1q"] = thermal_relaxation_kraus(self.t_1q_us, self.t1_us, self.t2_us)
            out["thermal_2q"] = thermal_relaxation_kraus(self.t_2q_us, self.t1_us, self.t2_us)
        return out


def _apply_noise(rho: np.ndarray, gate: Gate, noise: NoiseChannelSpec, n: int) -> np.ndarray:
    two = len(gate.qubits) == 2
    repeats = 3 if gate.name == "SWAP" else 1
    for _ in range(repeats):
        p = noise.p_2q if two else noise.p_1q
        if noise.depolarizing == "global" and p > 0:
            rho = (1 - p) * rho + p * np.eye(rho.shape[0]) / rho.shape[0]
        elif noise.depolarizing == "local" and p > 0:
            rho = _kernels.apply_superop(rho, _depol_superop(p, len(gate.qubits)), gate.qubits)
        if noise.thermal:
            duration = noise.t_2q_us if two else noise.t_1q_us
            sop = _thermal_superop(duration, noise.t1_us, noise.t2_us)
            for q in range(n):
                rho = _kernels.apply_superop(rho, sop, (q,))
    return rho


def apply_circuit(
    rho: DensityMatrix, circuit: Circuit, noise: NoiseChannelSpec | None = None
) -> DensityMatrix:
    """Run ``circuit`` on ``rho``; each gate is followed by its noise channel."""
    if circuit.num_qubits != rho.num_qubits:
        raise DimensionError(
            f"circuit has {circuit.num_qubits} qubits but state has {rho.num_qubits}"
        )
    noise = noise or NoiseChannelSpec.ideal()
    n = rho.num_qubits
    data = np.array(rho.data)
    for g in circuit.gates:
        data = _kernels.apply_superop(data, unitary_superop(gate_matrix(g)), g.qubits)
        if not noise.is_ideal:
            data = _apply_noise(data, g, noise, n)
    return DensityMatrix(data, validate=False)


# ---------------------------------------------------------------------------
# Expectations, layouts and fidelity
# ---------------------------------------------------------------------------


def _masks(p: PauliString) -> tuple[int, int, int]:
    n = p.num_qubits
    xm = sum(1 << (n - 1 - q) for q in np.flatnonzero(p.x))
    zm = sum(1 << (n - 1 - q) for q in np.flatnonzero(p.z))
    return xm, zm, int(np.count_nonzero(p.x & p.z))


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    v = values.copy()
    parity = np.zeros_like(v)
    while v.any():
        parity ^= v & 1
        v >>= 1
    return parity


def expectation(rho: DensityMatrix, pauli: PauliString) -> float:
    """``Tr[P rho]`` without forming ``P``."""
    if pauli.num_qubits != rho.num_qubits:
        raise DimensionError(
            f"Pauli has {pauli.num_qubits} qubits but state has {rho.num_qubits}"
        )
    xm, zm, ny = _masks(pauli)
    idx = np.arange(rho.dim)
    signs = 1 - 2 * _popcount_parity(idx & zm)
    val = (1j**ny) * np.sum(signs * rho.data[idx, idx ^ xm])
    if abs(val.imag) > TOL:
        raise NumericalError(f"Tr[P rho] has imaginary part {val.imag:g}")
    return float(val.real)


def permute_qubits(rho: DensityMatrix, layout: Sequence[int]) -> DensityMatrix:
    """Move logical qubit ``l`` to position ``layout[l]``."""
    n = rho.num_qubits
    if sorted(layout) != list(range(n)):
        raise InputError("layout must be a permutation of the register")
    if list(layout) == list(range(n)):
        return rho
    inverse = [0] * n
    for l, p in enumerate(layout):
        inverse[p] = l
    t = rho.data.reshape((2,) * (2 * n))
    t = np.transpose(t, inverse + [n + i for i in inverse])
    return DensityMatrix(t.reshape(rho.dim, rho.dim), validate=False)


def embed(rho: DensityMatrix, layout: Sequence[int], num_physical: int) -> DensityMatrix:
    """Place ``rho`` on ``num_physical`` qubits per ``layout``; spare qubits start in |0>."""
    n = rho.num_qubits
    _check_capacity(num_physical)
    if num_physical < n:
        raise DimensionError("physical register smaller than logical state")
    data = rho.data
    if num_physical > n:
        extra = np.zeros((2 ** (num_physical - n),) * 2, dtype=complex)
        extra[0, 0] = 1
        data = np.kron(data, extra)
    spare = [p for p in range(num_physical) if p not in set(layout)]
    full = list(layout) + spare
    return permute_qubits(DensityMatrix(data, validate=False), full)


def _is_vector(a) -> bool:
    return isinstance(a, np.ndarray) and a.ndim == 1


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    if w.min() < -TOL:
        raise NumericalError("fidelity argument is not positive semidefinite")
    w = np.clip(w, 0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def state_fidelity(a, b) -> float:
    """Uhlmann fidelity; ``<psi|rho|psi>`` when either argument is a state vector."""
    if _is_vector(a) or _is_vector(b):
        psi, rho = (a, b) if _is_vector(a) else (b, a)
        rho = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        if rho.shape[0] != psi.size:
            raise DimensionError("fidelity arguments have different dimensions")
        val = np.vdot(psi, rho @ psi)
        return float(min(1.0, max(0.0, val.real)))
    sa = a.data if isinstance(a, DensityMatrix) else np.asarray(a)
    sb = b.data if isinstance(b, DensityMatrix) else np.asarray(b)
    if sa.shape != sb.shape:
        raise DimensionError("fidelity arguments have different dimensions")
    # Square roots of rank-one matrices amplify round-off; use the vector form.
    for pure, other in ((sa, sb), (sb, sa)):
        if abs(np.vdot(pure, pure).real - 1) < PURITY_TOL:
            return state_fidelity(np.linalg.eigh(pure)[1][:, -1], other)
    root = _psd_sqrt(sb)
    inner = root @ sa @ root
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    if w.min() < -TOL:
        raise NumericalError("fidelity argument is not positive semidefinite")
    return float(min(1.0, np.sum(np.sqrt(np.clip(w, 0, None))) ** 2))


def random_state_vector(num_qubits: int, seed) -> np.ndarray:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    _check_capacity(num_qubits)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = 2**num_qubits
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_pure_state(num_qubits: int, seed) -> DensityMatrix:
    return DensityMatrix.from_vector(random_state_vector(num_qubits, seed))


# ---------------------------------------------------------------------------
# Group-level simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupSimulation:
    """Post-circuit state of one group and its members' measured expectations."""

    rho_tilde: DensityMatrix
    values: tuple[float, ...]
    physical_zstrings: tuple[PauliString, ...]
    signs: tuple[int, ...]


def physical_zstring(zmask: PauliString, final_layout: Sequence[int], num_physical: int) -> PauliString:
    z = np.zeros(num_physical, dtype=np.uint8)
    for l in np.flatnonzero(zmask.z):
        z[final_layout[l]] = 1
    return PauliString(np.zeros(num_physical, dtype=np.uint8), z)


def compact_routed(routed: RoutedCircuit) -> RoutedCircuit:
    """Drop physical qubits that hold no logical qubit and see no gate.

    Such qubits stay in |0> as an untouched tensor factor (thermal relaxation
    fixes |0>), so removing them leaves every member's expectation unchanged.
    """
    used = set(routed.initial_layout) | set(routed.final_layout)
    for g in routed.circuit.gates:
        used.update(g.qubits)
    keep = sorted(used)
    if len(keep) == routed.circuit.num_qubits:
        return routed
    relabel = {p: i for i, p in enumerate(keep)}
    gates = tuple(g._replace(qubits=tuple(relabel[q] for q in g.qubits)) for g in routed.circuit.gates)
    return RoutedCircuit(
        Circuit(len(keep), gates),
        tuple(relabel[p] for p in routed.initial_layout),
        tuple(relabel[p] for p in routed.final_layout),
    )


def simulate_group(
    rho: DensityMatrix, group, noise: NoiseChannelSpec | None = None
) -> GroupSimulation:
    """Run a group's routed measurement circuit on ``rho`` and read its members.

    ``group`` must carry ``routed`` (a :class:`RoutedCircuit`), ``signs`` and
    ``zmasks`` as filled by the synthesis step. ``rho`` is in logical order.
    """
    routed: RoutedCircuit | None = getattr(group, "routed", None)
    if routed is None or getattr(group, "zmasks", None) is None:
        raise StateError("group has no synthesized and routed measurement circuit")
    routed = compact_routed(routed)
    m = routed.circuit.num_qubits
    start = embed(rho, routed.initial_layout, m)
    out = apply_circuit(start, routed.circuit, noise)
    zs = tuple(physical_zstring(zm, routed.final_layout, m) for zm in group.zmasks)
    values = tuple(s * expectation(out, q) for s, q in zip(group.signs, zs))
    return GroupSimulation(out, values, zs, tuple(group.signs))


def grouped_expectations(rho: DensityMatrix, group, noise: NoiseChannelSpec | None = None) -> list[float]:
    """Noisy ``Tr[P rho_tilde]`` for every group member."""
    return list(simulate_group(rho, group, noise).values)
