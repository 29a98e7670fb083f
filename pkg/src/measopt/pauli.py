"""Phase-free Pauli strings in binary symplectic form and weighted observables."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionError, InputError, PauliParseError

logger = logging.getLogger(__name__)

_ENCODE = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_DECODE = {v: k for k, v in _ENCODE.items()}

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

COEFF_FLOOR = 1e-12


class PauliString:
    """An N-qubit Pauli operator without phase.

    Qubit 0 is the leftmost character of the text form. ``x[j]`` is set when
    qubit ``j`` carries X or Y, ``z[j]`` when it carries Z or Y.
    """

    __slots__ = ("_x", "_z", "_key", "_xbits", "_zbits")

    def __init__(self, x, z):
        x = np.array(x, dtype=np.uint8).reshape(-1)
        z = np.array(z, dtype=np.uint8).reshape(-1)
        if x.shape != z.shape:
            raise DimensionError(f"x has {x.size} entries but z has {z.size}")
        if x.size == 0:
            raise InputError("a Pauli string needs at least one qubit")
        if (x > 1).any() or (z > 1).any():
            raise InputError("symplectic bits must be 0 or 1")
        x.setflags(write=False)
        z.setflags(write=False)
        self._x = x
        self._z = z
        self._key = (x.tobytes(), z.tobytes())
        # Packed bitmasks make pairwise relations plain integer arithmetic.
        self._xbits = int.from_bytes(np.packbits(x).tobytes(), "big")
        self._zbits = int.from_bytes(np.packbits(z).tobytes(), "big")

    @classmethod
    def from_label(cls, text: str) -> "PauliString":
        return parse_pauli(text)

    @classmethod
    def identity(cls, num_qubits: int) -> "PauliString":
        zeros = np.zeros(num_qubits, dtype=np.uint8)
        return cls(zeros, zeros)

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def num_qubits(self) -> int:
        return self._x.size

    @property
    def label(self) -> str:
        return render_pauli(self)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self._x | self._z))

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self._x | self._z))

    def is_identity(self) -> bool:
        return not (self._x.any() or self._z.any())

    def is_z_type(self) -> bool:
        """True when every factor is I or Z (diagonal in the computational basis)."""
        return not self._x.any()

    def to_matrix(self) -> np.ndarray:
        mat = np.ones((1, 1), dtype=complex)
        for ch in self.label:
            mat = np.kron(mat, _SINGLE[ch])
        return mat

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"

    def __str__(self) -> str:
        return self.label


def parse_pauli(text: str, num_qubits: int | None = None) -> PauliString:
    """Parse an uppercase string over ``IXYZ``; qubit 0 is the first character."""
    if num_qubits is not None and len(text) != num_qubits:
        raise PauliParseError(
            f"expected {num_qubits} characters, got {len(text)}", min(len(text), num_qubits)
        )
    x = np.zeros(len(text), dtype=np.uint8)
    z = np.zeros(len(text), dtype=np.uint8)
    for i, ch in enumerate(text):
        try:
            x[i], z[i] = _ENCODE[ch]
        except KeyError:
            raise PauliParseError(f"invalid Pauli symbol {ch!r}", i) from None
    return PauliString(x, z)


def render_pauli(p: PauliString) -> str:
    return "".join(_DECODE[(int(a), int(b))] for a, b in zip(p.x, p.z))


def _check_width(a: PauliString, b: PauliString) -> None:
    if a.num_qubits != b.num_qubits:
        raise DimensionError(f"Pauli widths differ: {a.num_qubits} vs {b.num_qubits}")


def fully_commutes(a: PauliString, b: PauliString) -> bool:
    """Operator commutation: an even number of locally anticommuting positions."""
    _check_width(a, b)
    local = (a._xbits & b._zbits) ^ (a._zbits & b._xbits)
    return local.bit_count() % 2 == 0


def qubitwise_commutes(a: PauliString, b: PauliString) -> bool:
    _check_width(a, b)
    return not ((a._xbits & b._zbits) ^ (a._zbits & b._xbits))


def stack(paulis: Sequence[PauliString]) -> tuple[np.ndarray, np.ndarray]:
    """Stack Pauli strings into ``(m, n)`` uint8 X and Z matrices."""
    if not paulis:
        raise InputError("cannot stack an empty list of Pauli strings")
    n = paulis[0].num_qubits
    for p in paulis:
        if p.num_qubits != n:
            raise DimensionError(f"Pauli widths differ: {n} vs {p.num_qubits}")
    return np.stack([p.x for p in paulis]), np.stack([p.z for p in paulis])


def commutation_matrices(
    first: Sequence[PauliString], second: Sequence[PauliString]
) -> tuple[np.ndarray, np.ndarray]:
    """Boolean ``(fully_commutes, qubitwise_commutes)`` matrices between two lists."""
    x1, z1 = stack(first)
    x2, z2 = stack(second)
    if x1.shape[1] != x2.shape[1]:
        raise DimensionError(f"Pauli widths differ: {x1.shape[1]} vs {x2.shape[1]}")
    anti, conflict = _kernels.pair_relations(x1, z1, x2, z2)
    return ~anti, ~conflict


def anticommuting_qubits(group: Sequence[PauliString]) -> frozenset[int]:
    """Qubit positions where some pair of group members anticommutes locally.

    Two distinct non-identity single-qubit Paulis always anticommute, so a
    position qualifies exactly when it carries at least two different
    non-identity symbols across the group.
    """
    if len(group) == 0:
        raise InputError("anticommuting_qubits needs a non-empty group")
    x, z = stack(group)
    return anticommuting_columns(x, z)


def anticommuting_columns(x: np.ndarray, z: np.ndarray) -> frozenset[int]:
    code = x.astype(np.int8) + 2 * z.astype(np.int8)
    kinds = sum((code == c).any(axis=0).astype(np.int8) for c in (1, 2, 3))
    return frozenset(int(i) for i in np.flatnonzero(kinds >= 2))


def pauli_product(a: PauliString, b: PauliString) -> tuple[int, PauliString]:
    """Return ``(k, c)`` with ``a @ b == 1j**k * c`` as matrices."""
    _check_width(a, b)
    x1, z1 = a.x.astype(np.int64), a.z.astype(np.int64)
    x2, z2 = b.x.astype(np.int64), b.z.astype(np.int64)
    g = np.where(
        (x1 == 0) & (z1 == 0),
        0,
        np.where(
            (x1 == 1) & (z1 == 1),
            z2 - x2,
            np.where(x1 == 1, z2 * (2 * x2 - 1), x2 * (1 - 2 * z2)),
        ),
    )
    return int(g.sum()) % 4, PauliString(a.x ^ b.x, a.z ^ b.z)


@dataclass(frozen=True)
class WeightedObservable:
    """H = sum_i c_i P_i with real coefficients and distinct Pauli strings."""

    num_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        if self.num_qubits < 1:
            raise InputError("num_qubits must be positive")
        seen = set()
        for c, p in self.terms:
            if p.num_qubits != self.num_qubits:
                raise DimensionError(
                    f"term {p.label} has {p.num_qubits} qubits, expected {self.num_qubits}"
                )
            if not math.isfinite(c):
                raise InputError(f"coefficient of {p.label} is not finite")
            if p in seen:
                raise InputError(f"duplicate term {p.label}; use WeightedObservable.from_terms")
            seen.add(p)

    @classmethod
    def from_terms(
        cls, num_qubits: int, terms: Iterable[tuple[float, PauliString | str]]
    ) -> "WeightedObservable":
        """Build an observable, merging duplicates and dropping negligible terms.

        Merged terms keep the position of their first occurrence.
        """
        merged: dict[PauliString, float] = {}
        for c, p in terms:
            if isinstance(p, str):
                p = parse_pauli(p, num_qubits)
            c = float(c)
            if not math.isfinite(c):
                raise InputError(f"coefficient of {p.label} is not finite")
            merged[p] = merged.get(p, 0.0) + c
        kept = []
        for p, c in merged.items():
            if abs(c) < COEFF_FLOOR:
                logger.warning("dropping term %s with negligible coefficient %g", p.label, c)
                continue
            kept.append((c, p))
        return cls(num_qubits, tuple(kept))

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    @property
    def paulis(self) -> list[PauliString]:
        return [p for _, p in self.terms]

    @property
    def identity_coeff(self) -> float:
        return sum(c for c, p in self.terms if p.is_identity())

    def without_identity(self) -> "WeightedObservable":
        return WeightedObservable(
            self.num_qubits, tuple((c, p) for c, p in self.terms if not p.is_identity())
        )

    def to_matrix(self) -> np.ndarray:
        d = 2**self.num_qubits
        mat = np.zeros((d, d), dtype=complex)
        for c, p in self.terms:
            mat += c * p.to_matrix()
        return mat
