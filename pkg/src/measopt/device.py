"""Coupling graphs, noise parameters, device presets and topology generators."""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import GenerationError, InputError

INF = math.inf


class CouplingGraph:
    """Undirected qubit coupling graph with lazily cached hop distances.

    Disconnected pairs have distance ``math.inf``.
    """

    def __init__(self, num_qubits: int, edges: Iterable[tuple[int, int]]):
        if num_qubits < 1:
            raise InputError("a coupling graph needs at least one qubit")
        normalized = set()
        for e in edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise InputError(f"self-loop on qubit {i}")
            if not (0 <= i < num_qubits and 0 <= j < num_qubits):
                raise InputError(f"edge ({i}, {j}) outside 0..{num_qubits - 1}")
            normalized.add((min(i, j), max(i, j)))
        self.num_qubits = int(num_qubits)
        self.edges: frozenset[tuple[int, int]] = frozenset(normalized)
        self._adj = [[] for _ in range(self.num_qubits)]
        for i, j in sorted(self.edges):
            self._adj[i].append(j)
            self._adj[j].append(i)
        self._dist: np.ndarray | None = None
        self._lock = threading.Lock()

    def neighbors(self, q: int) -> list[int]:
        return list(self._adj[q])

    def degree(self, q: int) -> int:
        return len(self._adj[q])

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    @property
    def dist(self) -> np.ndarray:
        return all_pairs_distances(self)

    def is_connected(self) -> bool:
        return bool(np.isfinite(self.dist).all())

    def shortest_path(self, src: int, dst: int) -> list[int]:
        """BFS path from ``src`` to ``dst`` preferring low-index neighbors."""
        prev = {src: None}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            if u == dst:
                break
            for v in self._adj[u]:
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        if dst not in prev:
            return []
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        return path[::-1]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CouplingGraph):
            return NotImplemented
        return self.num_qubits == other.num_qubits and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.num_qubits, self.edges))

    def __repr__(self) -> str:
        return f"CouplingGraph(num_qubits={self.num_qubits}, edges={len(self.edges)})"


def all_pairs_distances(graph: CouplingGraph) -> np.ndarray:
    """Hop-count matrix from one BFS per vertex, computed once per graph."""
    if graph._dist is not None:
        return graph._dist
    with graph._lock:
        if graph._dist is None:
            n = graph.num_qubits
            dist = np.full((n, n), INF)
            for s in range(n):
                dist[s, s] = 0
                queue = deque([s])
                while queue:
                    u = queue.popleft()
                    for v in graph._adj[u]:
                        if dist[s, v] == INF:
                            dist[s, v] = dist[s, u] + 1
                            queue.append(v)
            dist.setflags(write=False)
            graph._dist = dist
    return graph._dist


def max_pairwise_distance(graph: CouplingGraph, qubits: Iterable[int]) -> float:
    """Largest hop distance between any two of ``qubits`` (0 for fewer than two)."""
    qs = sorted(set(int(q) for q in qubits))
    for q in qs:
        if not 0 <= q < graph.num_qubits:
            raise InputError(f"qubit {q} not in graph of {graph.num_qubits} qubits")
    if len(qs) < 2:
        return 0
    sub = graph.dist[np.ix_(qs, qs)]
    worst = sub.max()
    return INF if math.isinf(worst) else int(worst)


@dataclass(frozen=True)
class NoiseParameters:
    """Device noise summary. Probabilities are fractions, times in microseconds."""

    p_1q: float
    p_2q: float
    t1_us: float
    t2_us: float
    t_1q_us: float
    t_2q_us: float

    def __post_init__(self):
        for name in ("p_1q", "p_2q"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InputError(f"{name}={v} is not a probability")
        for name in ("t1_us", "t2_us", "t_1q_us", "t_2q_us"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if self.t2_us > 2 * self.t1_us * (1 + 1e-12):
            raise InputError(f"T2={self.t2_us} exceeds 2*T1={2 * self.t1_us}")


@dataclass(frozen=True)
class DeviceModel:
    name: str
    graph: CouplingGraph
    noise: NoiseParameters

    def __post_init__(self):
        if not self.name:
            raise InputError("device name must be non-empty")

    @property
    def num_qubits(self) -> int:
        return self.graph.num_qubits


# Mid-2024 median calibration values for the four reference devices.
PRESET_NOISE = {
    "sherbrooke": NoiseParameters(0.0002, 0.007, 259.7, 182.3, 0.057, 0.533),
    "torino": NoiseParameters(0.0003, 0.003, 160.5, 122.4, 0.032, 0.068),
    "aria1": NoiseParameters(0.0006, 0.086, 100e6, 1e6, 135.0, 600.0),
    "forte": NoiseParameters(0.0002, 0.010, 100e6, 1e6, 130.0, 970.0),
}
PRESET_TOPOLOGY = {
    "sherbrooke": "heavy_hex",
    "torino": "heavy_hex",
    "aria1": "complete",
    "forte": "complete",
}
DEFAULT_PRESET_QUBITS = 14


def preset_device(name: str, num_qubits: int = DEFAULT_PRESET_QUBITS) -> DeviceModel:
    key = name.lower()
    if key not in PRESET_NOISE:
        raise InputError(f"unknown device preset {name!r}; choose from {sorted(PRESET_NOISE)}")
    graph = generate_topology(PRESET_TOPOLOGY[key], num_qubits)
    return DeviceModel(key, graph, PRESET_NOISE[key])


def scale_noise(base: NoiseParameters, r: float) -> NoiseParameters:
    """Divide gate error rates by ``r``; stretch T1/T2 by ``ln r`` when ``r > 1``."""
    if not r >= 1:
        raise InputError(f"noise reduction ratio must be >= 1, got {r}")
    if r == 1:
        return base
    stretch = math.log(r)
    return replace(
        base,
        p_1q=base.p_1q / r,
        p_2q=base.p_2q / r,
        t1_us=base.t1_us * stretch,
        t2_us=base.t2_us * stretch,
    )


# ---------------------------------------------------------------------------
# Topology generators
# ---------------------------------------------------------------------------


def ring(num_qubits: int) -> CouplingGraph:
    if num_qubits < 3:
        return CouplingGraph(num_qubits, [(0, 1)] if num_qubits == 2 else [])
    return CouplingGraph(num_qubits, [(i, (i + 1) % num_qubits) for i in range(num_qubits)])


def complete(num_qubits: int) -> CouplingGraph:
    return CouplingGraph(
        num_qubits, [(i, j) for i in range(num_qubits) for j in range(i + 1, num_qubits)]
    )


def heavy_hex_lattice(distance: int = 3) -> CouplingGraph:
    """Heavy-hexagon lattice with ``distance`` rows of ``2*distance + 1`` qubits.

    Rows are paths; neighbouring rows are joined by bridge qubits placed every
    fourth column, the column offset alternating between 0 and 2 from one gap
    to the next. Every row qubit touches at most one bridge, so the maximum
    degree is 3, and every cycle passes through two bridges, so the lattice is
    triangle-free. Vertices are numbered row by row, each gap's bridges
    following the row above it.
    """
    if distance < 1:
        raise InputError("heavy-hex distance must be >= 1")
    width = 2 * distance + 1
    rows, bridges = [], []
    label = 0
    for r in range(distance):
        rows.append(list(range(label, label + width)))
        label += width
        if r + 1 < distance:
            cols = list(range(0 if r % 2 == 0 else 2, width, 4))
            bridges.append(list(zip(cols, range(label, label + len(cols)))))
            label += len(cols)
    edges = []
    for r, row in enumerate(rows):
        edges += [(row[c], row[c + 1]) for c in range(width - 1)]
        if r + 1 < distance:
            for c, b in bridges[r]:
                edges += [(row[c], b), (b, rows[r + 1][c])]
    return CouplingGraph(label, edges)


def heavy_hex(num_qubits: int) -> CouplingGraph:
    """Connected ``num_qubits``-vertex piece of the smallest heavy-hex lattice
    (distance 3 or larger) that holds it.

    The piece is the first ``num_qubits`` vertices of a breadth-first walk
    from vertex 0 (low labels first), relabelled in visit order, so every
    prefix is connected.
    """
    d = 3
    lattice = heavy_hex_lattice(d)
    while lattice.num_qubits < num_qubits:
        d += 1
        lattice = heavy_hex_lattice(d)
    seen = {0: 0}
    queue = deque([0])
    while queue and len(seen) < num_qubits:
        u = queue.popleft()
        for v in sorted(lattice.neighbors(u)):
            if v not in seen and len(seen) < num_qubits:
                seen[v] = len(seen)
                queue.append(v)
    edges = [(seen[i], seen[j]) for i, j in lattice.edges if i in seen and j in seen]
    return CouplingGraph(num_qubits, edges)


MAX_REGULAR_ATTEMPTS = 1000


def random_regular(num_qubits: int, degree: int, rng: np.random.Generator) -> CouplingGraph:
    """Connected random ``degree``-regular graph from the pairing model.

    Pairings with self-loops, repeated edges, or more than one component are
    rejected and redrawn, up to ``MAX_REGULAR_ATTEMPTS`` times.
    """
    if degree < 1 or degree >= num_qubits:
        raise InputError(f"degree {degree} infeasible for {num_qubits} qubits")
    if (degree * num_qubits) % 2:
        raise InputError(f"degree*num_qubits = {degree * num_qubits} must be even")
    if degree == num_qubits - 1:
        return complete(num_qubits)
    stubs = np.repeat(np.arange(num_qubits), degree)
    for _ in range(MAX_REGULAR_ATTEMPTS):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        if (pairs[:, 0] == pairs[:, 1]).any():
            continue
        edges = {(int(min(a, b)), int(max(a, b))) for a, b in pairs}
        if len(edges) != len(pairs):
            continue
        graph = CouplingGraph(num_qubits, edges)
        if graph.is_connected():
            return graph
    raise GenerationError(
        f"no connected simple {degree}-regular graph on {num_qubits} vertices "
        f"after {MAX_REGULAR_ATTEMPTS} attempts"
    )


TOPOLOGIES = ("ring", "complete", "heavy_hex", "random_regular")


def generate_topology(
    kind: str, num_qubits: int, degree: int | None = None, seed: int = 0
) -> CouplingGraph:
    if num_qubits < 1:
        raise InputError("num_qubits must be positive")
    if kind == "ring":
        return ring(num_qubits)
    if kind == "complete":
        return complete(num_qubits)
    if kind == "heavy_hex":
        return heavy_hex(num_qubits)
    if kind == "random_regular":
        if degree is None:
            raise InputError("random_regular needs a degree")
        return random_regular(num_qubits, degree, np.random.default_rng(seed))
    raise InputError(f"unknown topology {kind!r}; choose from {TOPOLOGIES}")
