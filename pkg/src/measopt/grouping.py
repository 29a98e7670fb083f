"""Grouping kernels (QWC, FC, HEC, GALIC) and Sorted Insertion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuits import Circuit, RoutedCircuit, cz_adjacency, diagonalize, route
from .device import CouplingGraph, DeviceModel, max_pairwise_distance
from .errors import ConfigurationError, DimensionError, InputError
from .pauli import (
    PauliString,
    WeightedObservable,
    anticommuting_qubits,
    commutation_matrices,
)

KERNEL_NAMES = ("qwc", "fc", "hec", "galic")


@dataclass(frozen=True)
class GroupingContext:
    """Problem context handed to every kernel decision."""

    device: DeviceModel | None = None
    epsilon_target: float | None = None

    def __post_init__(self):
        if self.epsilon_target is not None and not 0 < self.epsilon_target < 1:
            raise InputError(f"epsilon_target must lie in (0, 1), got {self.epsilon_target}")

    @property
    def graph(self) -> CouplingGraph | None:
        return None if self.device is None else self.device.graph

    def cnot_budget(self) -> float:
        """Largest entangling-gate count whose depolarizing bias stays within target."""
        p = self.device.noise.p_2q
        if p == 0:
            return math.inf
        if p >= 1:
            return 0.0
        return math.log(1 - self.epsilon_target) / math.log(1 - p)


@dataclass
class MeasurementGroup:
    """A commuting set of weighted terms and, once synthesized, its circuits."""

    paulis: list[PauliString]
    coeffs: list[float]
    circuit: Circuit | None = None
    signs: tuple[int, ...] | None = None
    zmasks: tuple[PauliString, ...] | None = None
    routed: RoutedCircuit | None = None
    assigned_shots: int | None = None

    def __post_init__(self):
        if not self.paulis:
            raise InputError("a measurement group needs at least one term")
        if len(self.paulis) != len(self.coeffs):
            raise DimensionError("paulis and coeffs differ in length")

    def __len__(self) -> int:
        return len(self.paulis)

    @property
    def num_qubits(self) -> int:
        return self.paulis[0].num_qubits

    @property
    def n_2q(self) -> int:
        c = self.routed.circuit if self.routed is not None else self.circuit
        return 0 if c is None else c.n_2q

    @property
    def depth(self) -> int:
        c = self.routed.circuit if self.routed is not None else self.circuit
        return 0 if c is None else c.depth

    def synthesize(self, graph: CouplingGraph | None = None) -> "MeasurementGroup":
        """Fill the diagonalizing circuit and its routed form (identity layout)."""
        diag = diagonalize(self.paulis)
        self.circuit = diag.circuit
        self.signs = diag.signs
        self.zmasks = diag.zmasks
        if graph is None:
            ident = tuple(range(self.num_qubits))
            self.routed = RoutedCircuit(diag.circuit, ident, ident)
        else:
            self.routed = route(diag.circuit, graph)
        return self


# ---------------------------------------------------------------------------
# Kernel predicates
# ---------------------------------------------------------------------------


def _as_list(group) -> list[PauliString]:
    paulis = list(getattr(group, "paulis", group))
    if not paulis:
        raise InputError("kernel called on an empty group")
    n = paulis[0].num_qubits
    for p in paulis:
        if p.num_qubits != n:
            raise DimensionError(f"Pauli widths differ: {n} vs {p.num_qubits}")
    return paulis


def qwc_accepts(group) -> bool:
    paulis = _as_list(group)
    if len(paulis) == 1:
        return True
    _, qwc = commutation_matrices(paulis, paulis)
    return bool(qwc.all())


def fc_accepts(group) -> bool:
    paulis = _as_list(group)
    if len(paulis) == 1:
        return True
    fc, _ = commutation_matrices(paulis, paulis)
    return bool(fc.all())


def _require_device(context: GroupingContext | None, kernel: str, num_qubits: int) -> CouplingGraph:
    if context is None or context.device is None:
        raise ConfigurationError(f"kernel {kernel!r} needs a device in its context")
    if context.device.num_qubits < num_qubits:
        raise ConfigurationError(
            f"device {context.device.name!r} has {context.device.num_qubits} qubits, "
            f"group needs {num_qubits}"
        )
    return context.device.graph


def _require_epsilon(context: GroupingContext) -> float:
    if context.epsilon_target is None:
        raise ConfigurationError("kernel 'galic' needs epsilon_target in its context")
    return context.epsilon_target


def _hec_commuting(paulis: list[PauliString], graph: CouplingGraph) -> bool:
    return all(graph.has_edge(a, b) for a, b in cz_adjacency(paulis))


def _galic_commuting(paulis: list[PauliString], context: GroupingContext) -> bool:
    ac = anticommuting_qubits(paulis)
    n_ac = len(ac)
    if n_ac <= 1:
        return True
    budget = context.cnot_budget()
    if math.isinf(budget):
        return True
    d_max = max_pairwise_distance(context.device.graph, ac)
    if math.isinf(d_max):
        return False
    worst = 0.5 * n_ac * (n_ac - 1) * (3 * (d_max - 1) + 1)
    return worst <= budget * (1 + 1e-12)


def hec_accepts(group, context: GroupingContext) -> bool:
    """FC groups whose canonical CZ graph is a subgraph of the coupling graph."""
    paulis = _as_list(group)
    graph = _require_device(context, "hec", paulis[0].num_qubits)
    if len(paulis) == 1:
        return True
    if not fc_accepts(paulis):
        return False
    return _hec_commuting(paulis, graph)


def galic_accepts(group, context: GroupingContext) -> bool:
    """FC groups whose worst-case routed CNOT count fits the bias budget."""
    paulis = _as_list(group)
    _require_device(context, "galic", paulis[0].num_qubits)
    _require_epsilon(context)
    if len(paulis) == 1:
        return True
    if not fc_accepts(paulis):
        return False
    return _galic_commuting(paulis, context)


class GroupingKernel:
    """Decision interface: may this set of Pauli strings be measured together?"""

    name = "base"
    needs_device = False
    needs_epsilon = False

    def accepts(self, group, context: GroupingContext | None = None) -> bool:
        raise NotImplementedError

    def accepts_commuting(self, paulis: list[PauliString], context) -> bool:
        """Decision for a group already known to be pairwise fully commuting."""
        return self.accepts(paulis, context)

    def check_context(self, context: GroupingContext | None, num_qubits: int) -> None:
        if self.needs_device:
            _require_device(context, self.name, num_qubits)
        if self.needs_epsilon:
            _require_epsilon(context)

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class QWCKernel(GroupingKernel):
    name = "qwc"

    def accepts(self, group, context=None) -> bool:
        return qwc_accepts(group)

    def accepts_commuting(self, paulis, context) -> bool:
        return qwc_accepts(paulis)


class FCKernel(GroupingKernel):
    name = "fc"

    def accepts(self, group, context=None) -> bool:
        return fc_accepts(group)

    def accepts_commuting(self, paulis, context) -> bool:
        return True


class HECKernel(GroupingKernel):
    name = "hec"
    needs_device = True

    def accepts(self, group, context=None) -> bool:
        return hec_accepts(group, context)

    def accepts_commuting(self, paulis, context) -> bool:
        return len(paulis) == 1 or _hec_commuting(paulis, context.device.graph)


class GALICKernel(GroupingKernel):
    name = "galic"
    needs_device = True
    needs_epsilon = True

    def accepts(self, group, context=None) -> bool:
        return galic_accepts(group, context)

    def accepts_commuting(self, paulis, context) -> bool:
        return len(paulis) == 1 or _galic_commuting(paulis, context)


KERNELS = {"qwc": QWCKernel(), "fc": FCKernel(), "hec": HECKernel(), "galic": GALICKernel()}


def get_kernel(name: str | GroupingKernel) -> GroupingKernel:
    if isinstance(name, GroupingKernel):
        return name
    try:
        return KERNELS[name.lower()]
    except KeyError:
        raise InputError(f"unknown kernel {name!r}; choose from {KERNEL_NAMES}") from None


# ---------------------------------------------------------------------------
# Sorted Insertion
# ---------------------------------------------------------------------------


def sorted_insertion(
    observable: WeightedObservable,
    kernel: str | GroupingKernel,
    context: GroupingContext | None = None,
) -> list[MeasurementGroup]:
    """Greedy grouping in descending ``|coeff|`` order.

    Each pass opens a group with the heaviest ungrouped term and then scans
    the remaining terms in order, keeping every term the kernel accepts
    alongside the current members. Ties keep input order (stable sort).
    """
    if len(observable) == 0:
        raise InputError("cannot group an empty observable")
    kernel = get_kernel(kernel)
    context = context or GroupingContext()
    kernel.check_context(context, observable.num_qubits)
    coeffs = observable.coeffs
    paulis = observable.paulis
    order = np.argsort(-np.abs(coeffs), kind="stable")
    fc, qwc = commutation_matrices(paulis, paulis)
    # The pairwise screen is exact for qwc/fc; hec and galic add a whole-group test.
    screen = qwc if kernel.name == "qwc" else fc
    remaining = [int(i) for i in order]
    groups = []
    while remaining:
        members = [remaining[0]]
        rest = []
        for i in remaining[1:]:
            if screen[i, members].all() and kernel.accepts_commuting(
                [paulis[j] for j in members + [i]], context
            ):
                members.append(i)
            else:
                rest.append(i)
        remaining = rest
        groups.append(
            MeasurementGroup([paulis[j] for j in members], [float(coeffs[j]) for j in members])
        )
    return groups


def group_observable(
    observable: WeightedObservable,
    kernel: str | GroupingKernel,
    context: GroupingContext | None = None,
    synthesize: bool = True,
) -> list[MeasurementGroup]:
    """Sorted Insertion followed by circuit synthesis and routing on the context's device."""
    groups = sorted_insertion(observable, kernel, context)
    if synthesize:
        graph = context.graph if context is not None else None
        for g in groups:
            g.synthesize(graph)
    return groups


# ---------------------------------------------------------------------------
# Partial-order checks on random commuting sets
# ---------------------------------------------------------------------------

MAX_SAMPLE_ATTEMPTS = 100


def random_pauli(num_qubits: int, rng: np.random.Generator, allow_identity: bool = False) -> PauliString:
    while True:
        x = rng.integers(0, 2, num_qubits, dtype=np.uint8)
        z = rng.integers(0, 2, num_qubits, dtype=np.uint8)
        if allow_identity or x.any() or z.any():
            return PauliString(x, z)


def random_commuting_set(
    num_qubits: int,
    size: int,
    rng: np.random.Generator,
    relation: str = "fc",
    max_attempts: int = MAX_SAMPLE_ATTEMPTS,
) -> list[PauliString]:
    """Rejection-sample up to ``size`` distinct Paulis that pairwise commute.

    ``relation`` is ``"fc"`` or ``"qwc"``. A slot that fails ``max_attempts``
    times ends the sample early, so the result may be smaller than ``size``.
    """
    pred = {"fc": fully_commute_with, "qwc": qubitwise_commute_with}[relation]
    out: list[PauliString] = []
    for _ in range(size):
        for _ in range(max_attempts):
            cand = random_pauli(num_qubits, rng)
            if cand not in out and pred(cand, out):
                out.append(cand)
                break
        else:
            break
    return out


def fully_commute_with(cand: PauliString, members: Sequence[PauliString]) -> bool:
    if not members:
        return True
    fc, _ = commutation_matrices([cand], members)
    return bool(fc.all())


def qubitwise_commute_with(cand: PauliString, members: Sequence[PauliString]) -> bool:
    if not members:
        return True
    _, qwc = commutation_matrices([cand], members)
    return bool(qwc.all())


@dataclass
class PartialOrderReport:
    """Sets accepted by the lower kernel but rejected by the upper one."""

    lower: str
    upper: str
    trials: int
    violations: list[list[PauliString]] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations


def check_partial_order(
    f1: str | GroupingKernel,
    f2: str | GroupingKernel,
    context: GroupingContext | None = None,
    trials: int = 1000,
    seed=0,
    min_width: int = 2,
    max_width: int = 6,
    max_size: int = 6,
) -> PartialOrderReport:
    """Sample random commuting sets and record every ``f1`` accept / ``f2`` reject."""
    f1, f2 = get_kernel(f1), get_kernel(f2)
    rng = np.random.default_rng(seed)
    report = PartialOrderReport(f1.name, f2.name, trials)
    for _ in range(trials):
        width = int(rng.integers(min_width, max_width + 1))
        size = int(rng.integers(1, max_size + 1))
        group = random_commuting_set(width, size, rng)
        if f1.accepts(group, context) and not f2.accepts(group, context):
            report.violations.append(group)
    return report
