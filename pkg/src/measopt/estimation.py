"""Bias, variance, sample variance, shot allocation and mean-squared error."""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, InputError, NumericalError, StateError
from .pauli import PauliString, pauli_product
from .simulator import DensityMatrix, GroupSimulation, NoiseChannelSpec, expectation, simulate_group

logger = logging.getLogger(__name__)

KCAL_PER_HARTREE = 627.509
DEFAULT_PRECISIONS = (1e-3, 1.6e-3, 1e-2)
TOL_VARIANCE = 1e-9


def relative_error_bound(p: float, n_2q: int) -> float:
    """Relative bias ``1 - (1-p)**n_2q`` of a Pauli read after ``n_2q`` depolarizing gates."""
    if not 0 <= p < 1:
        raise InputError(f"error probability must lie in [0, 1), got {p}")
    return 1.0 - (1.0 - p) ** n_2q


def invert_bound(p: float, epsilon_target: float) -> float:
    """Real-valued entangling-gate budget keeping the relative bias within ``epsilon_target``."""
    if not 0 <= p < 1:
        raise InputError(f"error probability must lie in [0, 1), got {p}")
    if not 0 < epsilon_target < 1:
        raise InputError(f"epsilon_target must lie in (0, 1), got {epsilon_target}")
    if p == 0:
        return math.inf
    return math.log(1 - epsilon_target) / math.log(1 - p)


# ---------------------------------------------------------------------------
# Variance of one group's estimator
# ---------------------------------------------------------------------------


def group_variance(rho_tilde: DensityMatrix, group) -> float:
    """``sum_jk c_j c_k (Tr[P_k P_j rho] - Tr[P_j rho] Tr[P_k rho])`` for a commuting group.

    ``group`` supplies ``paulis`` and ``coeffs``; products are formed
    symplectically and, since members commute, carry a real sign.
    """
    paulis = list(group.paulis)
    coeffs = np.asarray(group.coeffs, dtype=float)
    n = rho_tilde.num_qubits
    for p in paulis:
        if p.num_qubits != n:
            raise DimensionError(f"Pauli has {p.num_qubits} qubits but state has {n}")
    means = np.array([expectation(rho_tilde, p) for p in paulis])
    cache: dict[PauliString, float] = {}
    second = np.empty((len(paulis), len(paulis)))
    for j, pj in enumerate(paulis):
        for k in range(j, len(paulis)):
            phase, prod = pauli_product(paulis[k], pj)
            if phase % 2:
                raise NumericalError(
                    f"{paulis[k].label} and {pj.label} anticommute; group variance undefined"
                )
            if prod not in cache:
                cache[prod] = expectation(rho_tilde, prod)
            second[j, k] = second[k, j] = (1 - phase) * cache[prod]
    var = float(coeffs @ (second - np.outer(means, means)) @ coeffs)
    if var < -TOL_VARIANCE:
        raise NumericalError(f"group variance is negative ({var:g})")
    return max(var, 0.0)


@dataclass(frozen=True)
class _Measured:
    paulis: Sequence[PauliString]
    coeffs: Sequence[float]


def measured_variance(sim: GroupSimulation, coeffs: Sequence[float]) -> float:
    """Variance of a group estimator from its measured (signed Z-string) forms on ``rho_tilde``."""
    signed = [c * s for c, s in zip(coeffs, sim.signs)]
    return group_variance(sim.rho_tilde, _Measured(sim.physical_zstrings, signed))


# ---------------------------------------------------------------------------
# Shot allocation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotAllocation:
    """Per-group shots; ``fractional`` is the closed form, ``shots`` its integer rounding."""

    fractional: tuple[float, ...]
    shots: tuple[int, ...]
    total: float
    formulation: str
    epsilon: float | None = None

    def to_dict(self) -> dict:
        out = {
            "formulation": self.formulation,
            "total": self.total,
            "shots": list(self.shots),
            "fractional": list(self.fractional),
        }
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out


def _check_variances(variances) -> np.ndarray:
    v = np.asarray(variances, dtype=float).reshape(-1)
    if v.size == 0:
        raise InputError("no variances to allocate over")
    if not np.isfinite(v).all() or (v < 0).any():
        raise InputError("variances must be finite and non-negative")
    return v


def fixed_budget_allocation(variances, budget: float) -> np.ndarray:
    """Minimize ``sum Var_i / n_i`` subject to ``sum n_i = budget``."""
    v = _check_variances(variances)
    root = np.sqrt(v)
    if root.sum() == 0:
        return np.zeros_like(v)
    return budget * root / root.sum()


def fixed_precision_allocation(variances, epsilon: float) -> np.ndarray:
    """Minimize ``sum n_i`` subject to ``sum Var_i / n_i = epsilon**2``."""
    v = _check_variances(variances)
    root = np.sqrt(v)
    return root * root.sum() / epsilon**2


def _gain(v: float, n: int) -> float:
    return v / (n * (n + 1))


def integer_allocation(variances, total: int) -> np.ndarray:
    """Exact minimizer of ``sum Var_i / n_i`` over integers summing to ``total``.

    Groups with zero variance get no shots; every other group gets at least
    one. The objective is separable and convex, so taking increments in
    order of marginal gain ``Var / (n (n + 1))`` is optimal. A bisection on
    the Lagrange threshold takes the bulk of the increments at once and a
    heap hands out the remainder.
    """
    v = _check_variances(variances)
    total = int(total)
    pos = v > 0
    shots = np.zeros(v.size, dtype=np.int64)
    if not pos.any():
        return shots
    if total < pos.sum():
        raise InputError(f"{total} shots cannot cover {int(pos.sum())} groups with nonzero variance")

    scaled = v / v.max()

    def counts(lam: float) -> np.ndarray:
        # Increments k -> k+1 with gain above lam: k (k + 1) < Var / lam.
        ratio = scaled / lam
        k = np.floor((np.sqrt(1 + 4 * ratio) - 1) / 2).astype(np.int64)
        k = np.where(k * (k + 1) >= ratio, k - 1, k)
        return np.where(pos, 1 + np.maximum(k, 0), 0)

    # Below this threshold the largest group alone would exceed the budget.
    lo, hi = -math.log(4.0 * (total + 1) ** 2), 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if counts(math.exp(mid)).sum() > total:
            lo = mid
        else:
            hi = mid
    shots = counts(math.exp(hi))
    heap = [(-_gain(v[i], shots[i]), i) for i in np.flatnonzero(pos)]
    heapq.heapify(heap)
    for _ in range(total - int(shots.sum())):
        _, i = heapq.heappop(heap)
        shots[i] += 1
        heapq.heappush(heap, (-_gain(v[i], shots[i]), i))
    return shots


def allocate_shots(variances, budget: float | None = None, epsilon: float | None = None) -> ShotAllocation:
    """Closed-form minimal-variance shot split for a budget or a precision target.

    With ``budget``, the fractional shots follow
    ``n sqrt(Var_i) / sum_j sqrt(Var_j)``. With ``epsilon`` the total becomes
    ``(sum sqrt(Var))**2 / epsilon**2``. Integer shots are the exact integer
    optimum for the (rounded-up) total; for a precision target, shots are
    added until the target is met.
    """
    if (budget is None) == (epsilon is None):
        raise InputError("give exactly one of a shot budget or a precision target")
    v = _check_variances(variances)
    if not np.sqrt(v).sum() > 0:
        logger.warning("all group variances are zero; allocating no shots")
        z = (0.0,) * v.size
        if budget is not None:
            return ShotAllocation(z, (0,) * v.size, float(budget), "fixed_budget")
        return ShotAllocation(z, (0,) * v.size, 0.0, "fixed_precision", epsilon)
    if budget is not None:
        if not budget > 0:
            raise InputError(f"shot budget must be positive, got {budget}")
        frac = fixed_budget_allocation(v, budget)
        shots = integer_allocation(v, int(round(budget)))
        return ShotAllocation(tuple(frac.tolist()), tuple(shots.tolist()), float(budget), "fixed_budget")
    if not epsilon > 0:
        raise InputError(f"precision target must be positive, got {epsilon}")
    frac = fixed_precision_allocation(v, epsilon)
    total = float(frac.sum())
    n = max(math.ceil(total - 1e-9), int((v > 0).sum()))
    shots = integer_allocation(v, n)
    target = epsilon**2 * (1 + 1e-12)
    heap = [(-_gain(v[i], shots[i]), i) for i in np.flatnonzero(v > 0)]
    heapq.heapify(heap)
    while mse(v, shots) > target:
        _, i = heapq.heappop(heap)
        shots[i] += 1
        heapq.heappush(heap, (-_gain(v[i], shots[i]), i))
    return ShotAllocation(
        tuple(frac.tolist()), tuple(shots.tolist()), total, "fixed_precision", epsilon
    )


def shots_for_precision(variances, epsilon: float) -> float:
    """``n^eps = (sum sqrt(Var))**2 / eps**2``."""
    v = _check_variances(variances)
    return float(np.sqrt(v).sum() ** 2 / epsilon**2)


def mse(variances, shots, bias: float = 0.0) -> float:
    """``bias**2 + sum Var_i / n_i``; a group with variance but no shots gives ``inf``."""
    v = _check_variances(variances)
    n = np.asarray(shots, dtype=float).reshape(-1)
    if n.shape != v.shape:
        raise DimensionError("variances and shots differ in length")
    total = bias**2
    for vi, ni in zip(v, n):
        if vi == 0:
            continue
        if ni <= 0:
            return math.inf
        total += vi / ni
    return float(total)


# ---------------------------------------------------------------------------
# End-to-end estimator report
# ---------------------------------------------------------------------------


@dataclass
class GroupEstimate:
    index: int
    paulis: list[str]
    coeffs: list[float]
    n_2q: int
    depth: int
    ideal: float
    noisy: float
    bias: float
    relative_bias: float
    variance: float
    member_ideal: list[float]
    member_noisy: list[float]
    shots: int | None = None

    def to_dict(self) -> dict:
        out = {
            "index": self.index,
            "paulis": self.paulis,
            "coeffs": self.coeffs,
            "n_2q": self.n_2q,
            "depth": self.depth,
            "ideal": self.ideal,
            "expectation": self.noisy,
            "bias": self.bias,
            "relative_bias": self.relative_bias,
            "variance": self.variance,
        }
        if self.shots is not None:
            out["shots"] = self.shots
        return out


@dataclass
class EstimatorReport:
    per_group: list[GroupEstimate]
    ideal_value: float
    estimate: float
    bias: float
    sample_variance: float
    shots_for_target: dict[float, float] = field(default_factory=dict)
    allocation: ShotAllocation | None = None
    mse: float | None = None

    @property
    def variances(self) -> list[float]:
        return [g.variance for g in self.per_group]

    @property
    def num_groups(self) -> int:
        return len(self.per_group)

    def attach_allocation(self, allocation: ShotAllocation) -> None:
        self.allocation = allocation
        for g, n in zip(self.per_group, allocation.shots):
            g.shots = int(n)
        self.mse = mse(self.variances, allocation.fractional, self.bias)


def bias_report(
    rho: DensityMatrix, groups: Sequence, simulations: Sequence[GroupSimulation] | None
) -> tuple[float, list[float]]:
    """Total and per-group bias ``sum_j c_j (Tr[P_j rho_tilde] - Tr[P_j rho])``."""
    if simulations is None or len(simulations) != len(groups) or any(s is None for s in simulations):
        raise StateError("every group needs a noisy simulation before bias can be reported")
    per = []
    for g, sim in zip(groups, simulations):
        ideal = [expectation(rho, p) for p in g.paulis]
        per.append(float(sum(c * (a - b) for c, a, b in zip(g.coeffs, sim.values, ideal))))
    return float(sum(per)), per


def _relative(bias: float, ideal: float) -> float:
    if abs(ideal) < 1e-15:
        return 0.0 if abs(bias) < 1e-15 else math.inf
    return abs(bias) / abs(ideal)


def estimate_group(index: int, rho: DensityMatrix, group, noise: NoiseChannelSpec) -> GroupEstimate:
    sim = simulate_group(rho, group, noise)
    coeffs = [float(c) for c in group.coeffs]
    ideal_m = [expectation(rho, p) for p in group.paulis]
    ideal = float(np.dot(coeffs, ideal_m))
    noisy = float(np.dot(coeffs, sim.values))
    bias = noisy - ideal
    return GroupEstimate(
        index=index,
        paulis=[p.label for p in group.paulis],
        coeffs=coeffs,
        n_2q=group.n_2q,
        depth=group.depth,
        ideal=ideal,
        noisy=noisy,
        bias=bias,
        relative_bias=_relative(bias, ideal),
        variance=measured_variance(sim, coeffs),
        member_ideal=ideal_m,
        member_noisy=list(sim.values),
    )


def estimate(
    rho: DensityMatrix,
    groups: Sequence,
    noise: NoiseChannelSpec | None = None,
    precisions: Sequence[float] = DEFAULT_PRECISIONS,
    threads: int = 1,
) -> EstimatorReport:
    """Simulate every group's measurement circuit on ``rho`` and summarize the estimator."""
    noise = noise or NoiseChannelSpec.ideal()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per = list(pool.map(lambda ig: estimate_group(ig[0], rho, ig[1], noise), enumerate(groups)))
    else:
        per = [estimate_group(i, rho, g, noise) for i, g in enumerate(groups)]
    ideal = float(sum(g.ideal for g in per))
    value = float(sum(g.noisy for g in per))
    variances = [g.variance for g in per]
    sample_var = float(np.sqrt(variances).sum() ** 2)
    return EstimatorReport(
        per_group=per,
        ideal_value=ideal,
        estimate=value,
        bias=value - ideal,
        sample_variance=sample_var,
        shots_for_target={float(e): sample_var / e**2 for e in precisions},
    )


def sample_variance(variances) -> float:
    """``(sum_l sqrt(Var_l))**2``, the total shots needed per unit ``1/eps**2``."""
    v = _check_variances(variances)
    return float(np.sqrt(v).sum() ** 2)
