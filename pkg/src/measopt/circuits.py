"""Measurement-circuit synthesis, SWAP routing and gate statistics.

Circuits are gate lists applied left to right; a circuit ``C`` measures a
Pauli ``P`` through the identity ``C P C^dagger = s Q`` where ``Q`` is an
I/Z string and ``s = +-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .device import CouplingGraph
from .errors import ContractViolation, InputError, RoutingError
from .pauli import PauliString, anticommuting_columns, commutation_matrices, stack

CLIFFORD_1Q = ("H", "S", "SDG", "X", "Z")
CLIFFORD_2Q = ("CZ", "CNOT", "SWAP")
ROTATIONS = ("RX", "RY", "RZ")
GATE_ARITY = {**{g: 1 for g in CLIFFORD_1Q + ROTATIONS}, **{g: 2 for g in CLIFFORD_2Q}}
_ALIASES = {"CX": "CNOT", "SDAG": "SDG", "SDG": "SDG"}
# Display names used in JSON and reports.
DISPLAY = {"SDG": "Sdg"}


class Gate(NamedTuple):
    name: str
    qubits: tuple[int, ...]
    param: float | None = None

    def to_list(self) -> list:
        out = [DISPLAY.get(self.name, self.name), *self.qubits]
        if self.param is not None:
            out.append(self.param)
        return out


def make_gate(name: str, *qubits: int, param: float | None = None) -> Gate:
    key = _ALIASES.get(name.upper(), name.upper())
    if key not in GATE_ARITY:
        raise InputError(f"unknown gate {name!r}")
    if len(qubits) != GATE_ARITY[key]:
        raise InputError(f"gate {name} takes {GATE_ARITY[key]} qubits, got {len(qubits)}")
    if len(set(qubits)) != len(qubits):
        raise InputError(f"gate {name} needs distinct operands, got {qubits}")
    if (key in ROTATIONS) != (param is not None):
        raise InputError(f"gate {name} {'needs' if key in ROTATIONS else 'takes no'} angle")
    return Gate(key, tuple(int(q) for q in qubits), None if param is None else float(param))


@dataclass(frozen=True)
class Circuit:
    """A gate list on ``num_qubits`` qubits."""

    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.num_qubits:
                    raise InputError(f"gate {g.name} acts on qubit {q} outside register")

    @classmethod
    def from_list(cls, num_qubits: int, gates) -> "Circuit":
        """Build from ``[["H", 0], ["CZ", 0, 1], ["rx", 2, 0.5], ...]``."""
        parsed = []
        for entry in gates:
            name = str(entry[0])
            key = _ALIASES.get(name.upper(), name.upper())
            arity = GATE_ARITY.get(key)
            if arity is None:
                raise InputError(f"unknown gate {name!r}")
            qubits = [int(q) for q in entry[1 : 1 + arity]]
            rest = entry[1 + arity :]
            param = float(rest[0]) if rest else None
            parsed.append(make_gate(key, *qubits, param=param))
        return cls(num_qubits, tuple(parsed))

    def to_list(self) -> list[list]:
        return [g.to_list() for g in self.gates]

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise InputError("cannot concatenate circuits of different widths")
        return Circuit(self.num_qubits, self.gates + other.gates)

    @property
    def is_clifford(self) -> bool:
        return all(g.name not in ROTATIONS for g in self.gates)

    @property
    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            name = DISPLAY.get(g.name, g.name)
            out[name] = out.get(name, 0) + 1
        return out

    @property
    def n_2q(self) -> int:
        return sum(3 if g.name == "SWAP" else 1 for g in self.gates if len(g.qubits) == 2)

    @property
    def depth(self) -> int:
        level = [0] * self.num_qubits
        for g in self.gates:
            t = max(level[q] for q in g.qubits) + 1
            for q in g.qubits:
                level[q] = t
        return max(level, default=0)

    def entangling_pairs(self) -> list[tuple[int, int]]:
        return [tuple(sorted(g.qubits)) for g in self.gates if len(g.qubits) == 2]


# Backwards-friendly name for circuits built solely from Clifford gates.
CliffordCircuit = Circuit


def gate_stats(circuit: Circuit) -> tuple[int, int, dict[str, int]]:
    """Return ``(n_2q, depth, per-gate counts)``; an undecomposed SWAP counts 3."""
    return circuit.n_2q, circuit.depth, circuit.counts


# ---------------------------------------------------------------------------
# Sign-tracked Pauli conjugation through Clifford gates
# ---------------------------------------------------------------------------


def _conjugate_inplace(x: np.ndarray, z: np.ndarray, r: np.ndarray, gate: Gate) -> None:
    """Update stacked Paulis ``(x, z, sign bit r)`` to ``G P G^dagger``."""
    name, qs = gate.name, gate.qubits
    if name == "H":
        q = qs[0]
        r ^= x[:, q] & z[:, q]
        x[:, q], z[:, q] = z[:, q].copy(), x[:, q].copy()
    elif name == "S":
        q = qs[0]
        r ^= x[:, q] & z[:, q]
        z[:, q] ^= x[:, q]
    elif name == "SDG":
        q = qs[0]
        r ^= x[:, q] & (z[:, q] ^ 1)
        z[:, q] ^= x[:, q]
    elif name == "X":
        r ^= z[:, qs[0]]
    elif name == "Z":
        r ^= x[:, qs[0]]
    elif name == "CNOT":
        c, t = qs
        r ^= x[:, c] & z[:, t] & (x[:, t] ^ z[:, c] ^ 1)
        x[:, t] ^= x[:, c]
        z[:, c] ^= z[:, t]
    elif name == "CZ":
        a, b = qs
        r ^= x[:, a] & x[:, b] & (z[:, a] ^ z[:, b])
        z[:, a] ^= x[:, b]
        z[:, b] ^= x[:, a]
    elif name == "SWAP":
        a, b = qs
        x[:, [a, b]] = x[:, [b, a]]
        z[:, [a, b]] = z[:, [b, a]]
    else:
        raise ContractViolation(f"gate {name} is not Clifford")


def conjugate_paulis(
    paulis: Sequence[PauliString], circuit: Circuit
) -> list[tuple[int, PauliString]]:
    """Images ``C P C^dagger = sign * P'`` for each input, as ``(sign, P')``."""
    x, z = stack(paulis)
    x, z = x.copy(), z.copy()
    r = np.zeros(len(paulis), dtype=np.uint8)
    for g in circuit.gates:
        _conjugate_inplace(x, z, r, g)
    return [(1 - 2 * int(r[i]), PauliString(x[i], z[i])) for i in range(len(paulis))]


# ---------------------------------------------------------------------------
# GF(2) helpers on uint8 matrices
# ---------------------------------------------------------------------------


def _rref(m: np.ndarray, cols: Sequence[int] | None = None) -> tuple[np.ndarray, list[int]]:
    """Row-reduce ``m`` (copy) using only ``cols`` as pivot candidates."""
    m = m.copy()
    pivots = []
    row = 0
    for c in range(m.shape[1]) if cols is None else cols:
        if row >= m.shape[0]:
            break
        hits = np.flatnonzero(m[row:, c]) + row
        if hits.size == 0:
            continue
        p = hits[0]
        if p != row:
            m[[row, p]] = m[[p, row]]
        others = np.flatnonzero(m[:, c])
        others = others[others != row]
        m[others] ^= m[row]
        pivots.append(c)
        row += 1
    return m, pivots


def _rank(m: np.ndarray) -> int:
    return len(_rref(m)[1]) if m.size else 0


def _nullspace(m: np.ndarray) -> np.ndarray:
    """Basis (rows) of ``{v : m v = 0}`` over GF(2)."""
    ncols = m.shape[1]
    red, pivots = _rref(m)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(ncols, dtype=np.uint8)
        v[f] = 1
        for i, p in enumerate(pivots):
            v[p] = red[i, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), ncols)


def _symplectic_dual(rows: np.ndarray) -> np.ndarray:
    """Rows with x and z halves swapped, so ``rows_dual @ v`` is the symplectic form."""
    k = rows.shape[1] // 2
    return np.concatenate([rows[:, k:], rows[:, :k]], axis=1)


def _independent_rows(rows: np.ndarray) -> np.ndarray:
    kept = []
    for row in rows:
        trial = np.array(kept + [row], dtype=np.uint8)
        if _rank(trial) == len(kept) + 1:
            kept.append(row)
    return np.array(kept, dtype=np.uint8).reshape(len(kept), rows.shape[1])


def _single_qubit_candidates(k: int, first: str) -> list[np.ndarray]:
    order = {"z": ("z", "x"), "x": ("x", "z")}[first]
    out = []
    for kind in order:
        for q in range(k):
            v = np.zeros(2 * k, dtype=np.uint8)
            v[q if kind == "x" else k + q] = 1
            out.append(v)
    return out


def _complete_stabilizer(gens: np.ndarray, k: int, prefer: str) -> np.ndarray:
    """Extend commuting independent generators to ``k`` of them."""
    gens = gens.copy()
    candidates = _single_qubit_candidates(k, prefer) if prefer in ("x", "z") else []
    while gens.shape[0] < k:
        added = False
        for v in candidates:
            if (_symplectic_dual(gens) @ v % 2).any():
                continue
            trial = np.vstack([gens, v])
            if _rank(trial) == gens.shape[0] + 1:
                gens = trial
                added = True
                break
        if added:
            continue
        for v in _nullspace(_symplectic_dual(gens)):
            trial = np.vstack([gens, v])
            if _rank(trial) == gens.shape[0] + 1:
                gens = trial
                break
        else:  # pragma: no cover - the symplectic complement always has room
            raise ContractViolation("could not complete stabilizer group")
    return gens


def _graph_state_form(tab: np.ndarray, k: int) -> tuple[list[tuple[str, tuple[int, ...]]], np.ndarray]:
    """Reduce a full ``k``-generator tableau to graph-state form.

    Returns local gate instructions (on tableau column indices) applied so
    far, and the symmetric adjacency read off the Z block after X = I.
    """
    ops: list[tuple[str, tuple[int, ...]]] = []
    tab = tab.copy()
    red, xpiv = _rref(tab, cols=range(k))
    t = len(xpiv)
    if t < k:
        # Z-only rows: make them X-type on a complementary column set with H.
        zrows = red[t:]
        nonpivot = [c for c in range(k) if c not in xpiv]
        _, zpiv_rel = _rref(zrows[:, k:], cols=nonpivot)
        for c in zpiv_rel:
            ops.append(("H", (c,)))
            tab[:, [c, k + c]] = tab[:, [k + c, c]]
    red, xpiv = _rref(tab, cols=range(k))
    if len(xpiv) != k:  # pragma: no cover - guaranteed by the construction above
        raise ContractViolation("X block not invertible after local Hadamards")
    xblock = red[:, :k]
    order = np.argmax(xblock, axis=1)
    red = red[np.argsort(order)]
    zblock = red[:, k:]
    if not np.array_equal(zblock, zblock.T):  # pragma: no cover
        raise ContractViolation("graph-state Z block not symmetric; generators do not commute")
    return ops, zblock


@dataclass(frozen=True)
class Diagonalization:
    """A measurement circuit together with each member's measured Z string."""

    circuit: Circuit
    signs: tuple[int, ...]
    zmasks: tuple[PauliString, ...]
    anticommuting: frozenset[int] = field(default_factory=frozenset)


def _check_commuting(paulis: Sequence[PauliString]) -> None:
    fc, _ = commutation_matrices(paulis, paulis)
    if not fc.all():
        i, j = np.argwhere(~fc)[0]
        raise ContractViolation(
            f"group is not commuting: {paulis[i].label} and {paulis[j].label} anticommute"
        )


def _synthesize(paulis: Sequence[PauliString], prefer: str) -> list[Gate]:
    n = paulis[0].num_qubits
    x, z = stack(paulis)
    ac = sorted(anticommuting_columns(x, z))
    gates: list[Gate] = []
    acset = set(ac)
    for q in range(n):
        if q in acset:
            continue
        col_x, col_z = x[:, q], z[:, q]
        if (col_x & col_z).any():
            gates += [make_gate("SDG", q), make_gate("H", q)]
        elif col_x.any():
            gates.append(make_gate("H", q))
    k = len(ac)
    if k == 0:
        return gates
    rows = np.concatenate([x[:, ac], z[:, ac]], axis=1)
    gens = _independent_rows(rows)
    full = _complete_stabilizer(gens, k, prefer)
    local_ops, adj = _graph_state_form(full, k)
    for name, (c,) in local_ops:
        gates.append(make_gate(name, ac[c]))
    for i in range(k):
        if adj[i, i]:
            gates.append(make_gate("SDG", ac[i]))
    for i in range(k):
        for j in range(i + 1, k):
            if adj[i, j]:
                gates.append(make_gate("CZ", ac[i], ac[j]))
    gates += [make_gate("H", q) for q in ac]
    return gates


def diagonalize(group) -> Diagonalization:
    """Clifford circuit rotating a commuting Pauli group onto I/Z strings.

    Qubits where the group never anticommutes get single-qubit rotations
    only (H for X, Sdg then H for Y). On the anticommuting qubits the group
    is extended to a full stabilizer group and brought to graph-state form,
    so the entangling gates are CZs on graph edges among those qubits, at
    most ``k(k-1)/2`` of them for ``k`` anticommuting qubits. Three fixed
    extension orders are tried and the one with the fewest CZs is kept.
    """
    paulis = list(getattr(group, "paulis", group))
    if not paulis:
        raise InputError("cannot diagonalize an empty group")
    _check_commuting(paulis)
    n = paulis[0].num_qubits
    best = None
    for prefer in ("z", "x", "perp"):
        gates = _synthesize(paulis, prefer)
        n2q = sum(1 for g in gates if len(g.qubits) == 2)
        if best is None or n2q < best[0]:
            best = (n2q, gates)
    circuit = Circuit(n, tuple(best[1]))
    images = conjugate_paulis(paulis, circuit)
    for (sign, img), p in zip(images, paulis):
        if not img.is_z_type():  # pragma: no cover - construction guarantees this
            raise ContractViolation(f"synthesis left {p.label} as {img.label}")
    return Diagonalization(
        circuit,
        tuple(s for s, _ in images),
        tuple(img for _, img in images),
        anticommuting_columns(*stack(paulis)),
    )


def cz_adjacency(group) -> frozenset[tuple[int, int]]:
    """Qubit pairs joined by an entangling gate in the canonical circuit."""
    return frozenset(diagonalize(group).circuit.entangling_pairs())


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoutedCircuit:
    """A circuit on physical qubits plus the logical-to-physical layouts."""

    circuit: Circuit
    initial_layout: tuple[int, ...]
    final_layout: tuple[int, ...]

    @property
    def n_2q(self) -> int:
        return self.circuit.n_2q

    @property
    def depth(self) -> int:
        return self.circuit.depth


def _swap_as_cnots(a: int, b: int) -> list[Gate]:
    return [make_gate("CNOT", a, b), make_gate("CNOT", b, a), make_gate("CNOT", a, b)]


def route(
    circuit: Circuit, graph: CouplingGraph, initial_layout: Sequence[int] | None = None
) -> RoutedCircuit:
    """Greedy SWAP insertion along BFS shortest paths.

    For a two-qubit gate whose operands sit ``D`` hops apart, the first
    operand is swapped ``D - 1`` times toward the second (3 CNOTs per SWAP)
    and the layout change is kept, not undone. SWAP gates present in the
    input are emitted as 3 CNOTs on adjacent operands.
    """
    if circuit.num_qubits > graph.num_qubits:
        raise RoutingError(
            f"circuit needs {circuit.num_qubits} qubits, device has {graph.num_qubits}"
        )
    if initial_layout is None:
        layout = list(range(circuit.num_qubits))
    else:
        layout = [int(q) for q in initial_layout]
        if len(layout) != circuit.num_qubits or len(set(layout)) != len(layout):
            raise RoutingError("initial layout must map each logical qubit to a distinct qubit")
    start = tuple(layout)
    where = {p: l for l, p in enumerate(layout)}
    out: list[Gate] = []
    for g in circuit.gates:
        if len(g.qubits) == 1:
            out.append(g._replace(qubits=(layout[g.qubits[0]],)))
            continue
        a, b = g.qubits
        pa, pb = layout[a], layout[b]
        if not graph.has_edge(pa, pb):
            path = graph.shortest_path(pa, pb)
            if not path:
                raise RoutingError(f"qubits {pa} and {pb} are disconnected on the device")
            for u, v in zip(path[:-2], path[1:-1]):
                out += _swap_as_cnots(u, v)
                lu, lv = where.get(u), where.get(v)
                if lu is not None:
                    layout[lu] = v
                if lv is not None:
                    layout[lv] = u
                where = {p: l for l, p in enumerate(layout)}
            pa = layout[a]
        if g.name == "SWAP":
            out += _swap_as_cnots(pa, pb)
        else:
            out.append(g._replace(qubits=(pa, pb)))
    return RoutedCircuit(Circuit(graph.num_qubits, tuple(out)), start, tuple(layout))
