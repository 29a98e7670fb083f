"""Connectivity-degree by noise-ratio sweeps and their linear regressions."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .circuits import Circuit, route
from .device import DeviceModel, NoiseParameters, random_regular, scale_noise
from .errors import InputError, RegressionError
from .estimation import estimate
from .grouping import GroupingContext, group_observable
from .pauli import WeightedObservable
from .simulator import (
    DensityMatrix,
    NoiseChannelSpec,
    apply_circuit,
    compact_routed,
    embed,
    permute_qubits,
    random_pure_state,
)

DEFAULT_RATIOS = (1.0, 10.0, 100.0)

# Named random streams; each draws from SeedSequence(seed, spawn_key=(stream, ...)).
STREAMS = {"topology": 0, "states": 1, "cells": 2, "observable": 3}


def stream_rng(seed: int, stream: str, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[stream], *map(int, key)))
    return np.random.default_rng(ss)


def default_degrees(num_qubits: int) -> list[int]:
    """Feasible random-regular degrees from a ring up to all-to-all."""
    return [d for d in range(2, num_qubits) if (d * num_qubits) % 2 == 0]


@dataclass
class SweepGrid:
    """Cell statistics indexed ``[degree_index, ratio_index]``.

    ``records`` holds one row per (cell, trial) with the trial's mean over
    states; ``mean`` and ``std`` pool every per-state value of a cell.
    """

    metric: str
    degrees: list[int]
    ratios: list[float]
    mean: np.ndarray
    std: np.ndarray
    count: np.ndarray
    trials: int
    seed: int
    records: list[dict] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.degrees), len(self.ratios)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["degree", "ratio", "trial", "metric", "value"])
        for rec in self.records:
            writer.writerow([rec["degree"], repr(rec["ratio"]), rec["trial"], self.metric, repr(rec["value"])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "degrees": list(self.degrees),
            "ratios": list(self.ratios),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "count": self.count.tolist(),
            "trials": self.trials,
            "seed": self.seed,
        }


def _empty_grid(metric, degrees, ratios, trials, seed) -> SweepGrid:
    shape = (len(degrees), len(ratios))
    return SweepGrid(
        metric, list(degrees), [float(r) for r in ratios],
        np.zeros(shape), np.zeros(shape), np.zeros(shape, dtype=int), trials, seed,
    )


def _as_noise(base) -> tuple[str, NoiseParameters]:
    if isinstance(base, DeviceModel):
        return base.name, base.noise
    if isinstance(base, NoiseParameters):
        return "base", base
    raise InputError("base device must be a DeviceModel or NoiseParameters")


def _cell_device(name, noise, n, degree, ratio_index, ratio, trial, seed) -> DeviceModel:
    if not 2 <= degree < n:
        raise InputError(f"degree {degree} infeasible for {n} qubits")
    graph = random_regular(n, degree, stream_rng(seed, "topology", degree, ratio_index, trial))
    return DeviceModel(f"{name}-d{degree}-r{ratio:g}", graph, scale_noise(noise, ratio))


def _states(n: int, count: int, seed: int) -> list[DensityMatrix]:
    return [random_pure_state(n, stream_rng(seed, "states", s)) for s in range(count)]


def _fill(grid: SweepGrid, i: int, j: int, per_trial: list[list[float]], degree, ratio) -> None:
    pooled = np.array([v for vals in per_trial for v in vals])
    grid.mean[i, j] = float(np.mean([np.mean(v) for v in per_trial]))
    grid.std[i, j] = float(pooled.std())
    grid.count[i, j] = pooled.size
    for t, vals in enumerate(per_trial):
        grid.records.append(
            {"degree": int(degree), "ratio": float(ratio), "trial": t, "value": float(np.mean(vals))}
        )


def run_variance_sweep(
    observable: WeightedObservable,
    base_device,
    degrees: Sequence[int] | None = None,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    epsilon_target: float = 0.01,
    states: int = 10,
    seed: int = 0,
    trials: int = 1,
    noise_mode: str = "device",
    kernel: str = "galic",
) -> SweepGrid:
    """Mean sample variance ``(sum sqrt Var)**2`` of GALIC groupings across the grid.

    Every cell sees the same random pure states; each (cell, trial) draws
    its own random-regular coupling graph.
    """
    n = observable.num_qubits
    degrees = default_degrees(n) if degrees is None else list(degrees)
    grid = _empty_grid("sample_variance", degrees, ratios, trials, seed)
    if not degrees or not len(ratios):
        return grid
    name, noise = _as_noise(base_device)
    rhos = _states(n, states, seed)
    for i, d in enumerate(degrees):
        for j, r in enumerate(ratios):
            per_trial = []
            for t in range(trials):
                dev = _cell_device(name, noise, n, d, j, r, t, seed)
                ctx = GroupingContext(dev, epsilon_target)
                groups = group_observable(observable, kernel, ctx)
                spec = NoiseChannelSpec.from_mode(noise_mode, dev.noise)
                per_trial.append([estimate(rho, groups, spec).sample_variance for rho in rhos])
            _fill(grid, i, j, per_trial, d, r)
    return grid


def prepare_ansatz_state(
    ansatz: Circuit, graph, noise: NoiseChannelSpec
) -> tuple[DensityMatrix, DensityMatrix]:
    """Ideal and noisy logical-order states produced by ``ansatz`` from |0...0>.

    The noisy state comes from the ansatz routed onto ``graph``; the final
    SWAP permutation is undone as a relabelling so the result is in logical
    order.
    """
    n = ansatz.num_qubits
    ideal = apply_circuit(DensityMatrix.zero_state(n), ansatz)
    if graph is None:
        return ideal, apply_circuit(DensityMatrix.zero_state(n), ansatz, noise)
    routed = compact_routed(route(ansatz, graph))
    m = routed.circuit.num_qubits
    if m != n:
        raise InputError("ansatz register must match the device width for bias sweeps")
    start = embed(DensityMatrix.zero_state(n), routed.initial_layout, m)
    out = apply_circuit(start, routed.circuit, noise)
    inverse = [0] * n
    for l, p in enumerate(routed.final_layout):
        inverse[p] = l
    return ideal, permute_qubits(out, inverse)


def run_bias_sweep(
    ansatz: Circuit,
    observable: WeightedObservable,
    base_device,
    degrees: Sequence[int] | None = None,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    epsilon_target: float = 0.01,
    seed: int = 0,
    trials: int = 1,
    noise_mode: str = "device",
    kernel: str = "galic",
) -> SweepGrid:
    """Estimator bias relative to the ansatz's ideal expectation across the grid."""
    n = observable.num_qubits
    if ansatz.num_qubits != n:
        raise InputError(f"ansatz has {ansatz.num_qubits} qubits, observable {n}")
    degrees = default_degrees(n) if degrees is None else list(degrees)
    grid = _empty_grid("bias", degrees, ratios, trials, seed)
    if not degrees or not len(ratios):
        return grid
    name, noise = _as_noise(base_device)
    for i, d in enumerate(degrees):
        for j, r in enumerate(ratios):
            per_trial = []
            for t in range(trials):
                dev = _cell_device(name, noise, n, d, j, r, t, seed)
                spec = NoiseChannelSpec.from_mode(noise_mode, dev.noise)
                ideal, noisy = prepare_ansatz_state(ansatz, dev.graph, spec)
                groups = group_observable(observable, kernel, GroupingContext(dev, epsilon_target))
                rep = estimate(noisy, groups, spec)
                truth = sum(g.ideal for g in estimate(ideal, groups, NoiseChannelSpec.ideal()).per_group)
                per_trial.append([rep.estimate - truth])
            _fill(grid, i, j, per_trial, d, r)
    return grid


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    pearson: float
    constant: bool = False


@dataclass(frozen=True)
class RegressionSummary:
    """Averaged per-row and per-column fits of a sweep grid.

    ``*_d`` fits the metric against degree at fixed ratio; ``*_r`` against
    ``log10(ratio)`` at fixed degree.
    """

    alpha_d: float
    beta_d: float
    alpha_d_stderr: float
    beta_d_stderr: float
    pearson_d: float
    alpha_r: float
    beta_r: float
    alpha_r_stderr: float
    beta_r_stderr: float
    pearson_r: float
    constant_d: bool = False
    constant_r: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def fit_line(x, y) -> LineFit:
    """Ordinary least squares; a constant ``y`` gives slope 0 and Pearson 0 with ``constant`` set."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.unique(x).size < 2:
        raise RegressionError("regression needs at least two distinct x values")
    if np.ptp(y) == 0:
        return LineFit(0.0, float(y[0]), 0.0, 0.0, 0.0, True)
    res = stats.linregress(x, y)
    return LineFit(
        float(res.slope), float(res.intercept), float(res.stderr),
        float(res.intercept_stderr), float(res.rvalue),
    )


def _average(fits: list[LineFit]) -> tuple[float, float, float, float, float, bool]:
    k = len(fits)
    return (
        float(np.mean([f.slope for f in fits])),
        float(np.mean([f.intercept for f in fits])),
        float(math.sqrt(sum(f.slope_stderr**2 for f in fits)) / k),
        float(math.sqrt(sum(f.intercept_stderr**2 for f in fits)) / k),
        float(np.mean([f.pearson for f in fits])),
        any(f.constant for f in fits),
    )


def regress(grid: SweepGrid) -> RegressionSummary:
    """Fit every row against degree and every column against ``log10`` ratio, then average."""
    if grid.mean.size == 0:
        raise RegressionError("cannot regress an empty grid")
    d = np.asarray(grid.degrees, dtype=float)
    logr = np.log10(np.asarray(grid.ratios, dtype=float))
    by_d = [fit_line(d, grid.mean[:, j]) for j in range(len(grid.ratios))]
    by_r = [fit_line(logr, grid.mean[i, :]) for i in range(len(grid.degrees))]
    a_d, b_d, sa_d, sb_d, p_d, c_d = _average(by_d)
    a_r, b_r, sa_r, sb_r, p_r, c_r = _average(by_r)
    return RegressionSummary(a_d, b_d, sa_d, sb_d, p_d, a_r, b_r, sa_r, sb_r, p_r, c_d, c_r)
