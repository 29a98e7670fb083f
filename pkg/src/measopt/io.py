"""JSON and binary file formats for observables, devices, circuits, reports and states."""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .circuits import Circuit, RoutedCircuit
from .device import (
    PRESET_NOISE,
    CouplingGraph,
    DeviceModel,
    NoiseParameters,
    preset_device,
)
from .errors import InputError, MeasoptError
from .estimation import KCAL_PER_HARTREE, EstimatorReport, ShotAllocation
from .pauli import WeightedObservable, parse_pauli
from .simulator import DensityMatrix

UNITS = {"hartree": 1.0, "kcalmol": KCAL_PER_HARTREE}


def _clean(obj):
    """Replace non-finite floats with ``None`` and numpy scalars with Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: fixed key order as built, shortest round-trip floats."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def write_json(obj, path: str | Path | None) -> str:
    text = dumps(obj)
    if path is not None:
        Path(path).write_text(text)
    return text


def read_json(path: str | Path):
    """Load JSON, reporting syntax errors with their line and column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _field(data: dict, key: str, where: str):
    if not isinstance(data, dict) or key not in data:
        raise InputError(f"{where}: missing field {key!r}")
    return data[key]


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


def observable_from_dict(data: dict, where: str = "observable") -> WeightedObservable:
    n = _field(data, "num_qubits", where)
    if not isinstance(n, int) or n < 1:
        raise InputError(f"{where}: num_qubits must be a positive integer")
    terms = []
    for i, t in enumerate(_field(data, "terms", where)):
        loc = f"{where}: terms[{i}]"
        label = _field(t, "pauli", loc)
        coeff = _field(t, "coeff", loc)
        if not isinstance(label, str):
            raise InputError(f"{loc}.pauli must be a string")
        if isinstance(coeff, bool) or not isinstance(coeff, (int, float)):
            raise InputError(f"{loc}.coeff must be a number")
        try:
            terms.append((float(coeff), parse_pauli(label, n)))
        except InputError as exc:
            raise InputError(f"{loc}.pauli: {exc}") from None
    return WeightedObservable.from_terms(n, terms)


def observable_to_dict(obs: WeightedObservable) -> dict:
    return {
        "num_qubits": obs.num_qubits,
        "terms": [{"pauli": p.label, "coeff": c} for c, p in obs.terms],
    }


def load_observable(path) -> WeightedObservable:
    return observable_from_dict(read_json(path), str(path))


# ---------------------------------------------------------------------------
# Devices
# ---------------------------------------------------------------------------


def noise_to_dict(noise: NoiseParameters) -> dict:
    return {
        "p_1q": noise.p_1q,
        "p_2q": noise.p_2q,
        "t1_us": noise.t1_us,
        "t2_us": noise.t2_us,
        "t_1q_us": noise.t_1q_us,
        "t_2q_us": noise.t_2q_us,
    }


def device_to_dict(device: DeviceModel) -> dict:
    return {
        "name": device.name,
        "num_qubits": device.num_qubits,
        "edges": [list(e) for e in device.graph.sorted_edges()],
        "noise": noise_to_dict(device.noise),
    }


def device_from_dict(data: dict, where: str = "device") -> DeviceModel:
    n = _field(data, "num_qubits", where)
    edges = _field(data, "edges", where)
    noise = _field(data, "noise", where)
    try:
        params = NoiseParameters(**{k: float(_field(noise, k, f"{where}: noise")) for k in (
            "p_1q", "p_2q", "t1_us", "t2_us", "t_1q_us", "t_2q_us")})
        graph = CouplingGraph(int(n), [tuple(e) for e in edges])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MeasoptError):
            raise InputError(f"{where}: {exc}") from None
        raise InputError(f"{where}: malformed device description ({exc})") from None
    return DeviceModel(str(data.get("name", "custom")), graph, params)


def load_device(spec: str, num_qubits: int | None = None) -> DeviceModel:
    """A preset name (sized to ``num_qubits`` when given) or a device JSON path."""
    if spec.lower() in PRESET_NOISE:
        return preset_device(spec) if num_qubits is None else preset_device(spec, num_qubits)
    path = Path(spec)
    if not path.exists():
        raise InputError(
            f"device {spec!r} is neither a preset ({', '.join(sorted(PRESET_NOISE))}) nor a file"
        )
    return device_from_dict(read_json(path), str(path))


# ---------------------------------------------------------------------------
# Circuits, groupings, reports
# ---------------------------------------------------------------------------


def circuit_to_dict(circuit: Circuit | RoutedCircuit) -> dict:
    routed = circuit if isinstance(circuit, RoutedCircuit) else None
    c = routed.circuit if routed else circuit
    out = {"num_qubits": c.num_qubits, "gates": c.to_list(), "n_2q": c.n_2q, "depth": c.depth}
    if routed is not None:
        out["initial_layout"] = list(routed.initial_layout)
        out["final_permutation"] = list(routed.final_layout)
    return out


def circuit_from_dict(data: dict, where: str = "circuit") -> Circuit:
    n = _field(data, "num_qubits", where)
    gates = _field(data, "gates", where)
    try:
        return Circuit.from_list(int(n), gates)
    except (TypeError, IndexError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from None


def load_circuit(path) -> Circuit:
    return circuit_from_dict(read_json(path), str(path))


def grouping_to_dict(kernel: str, epsilon_target, device: DeviceModel | None, groups) -> dict:
    return {
        "kernel": kernel,
        "epsilon_target": epsilon_target,
        "device": None if device is None else device.name,
        "num_groups": len(groups),
        "groups": [
            {
                "paulis": [p.label for p in g.paulis],
                "coeffs": list(g.coeffs),
                "n_2q": g.n_2q,
                "depth": g.depth,
                "circuit": None if g.routed is None else circuit_to_dict(g.routed),
            }
            for g in groups
        ],
    }


def grouping_summary(groups) -> dict:
    n2q = [g.n_2q for g in groups]
    depth = [g.depth for g in groups]
    return {
        "groups": len(groups),
        "n_2q_mean": float(np.mean(n2q)),
        "n_2q_max": int(max(n2q)),
        "depth_mean": float(np.mean(depth)),
        "depth_max": int(max(depth)),
    }


def report_to_dict(
    report: EstimatorReport, kernel: str, device: str | None, units: str = "hartree"
) -> dict:
    """Energies scaled to ``units``; variances scale with the square of the unit."""
    if units not in UNITS:
        raise InputError(f"unknown units {units!r}; choose from {sorted(UNITS)}")
    f = UNITS[units]
    per = []
    for g in report.per_group:
        d = g.to_dict()
        for k in ("ideal", "expectation", "bias"):
            d[k] *= f
        d["coeffs"] = [c * f for c in d["coeffs"]]
        d["variance"] *= f * f
        per.append(d)
    out = {
        "kernel": kernel,
        "device": device,
        "units": units,
        "ideal": report.ideal_value * f,
        "estimate": report.estimate * f,
        "bias": report.bias * f,
        "sample_variance": report.sample_variance * f * f,
        "groups": report.num_groups,
        "shots_for_target": {repr(e * f): n for e, n in report.shots_for_target.items()},
        "per_group": per,
    }
    if report.allocation is not None:
        out["allocation"] = report.allocation.to_dict()
        out["mse"] = report.mse * f * f
    return out


def allocation_to_dict(alloc: ShotAllocation, variances) -> dict:
    out = alloc.to_dict()
    out["variances"] = [float(v) for v in variances]
    return out


def load_variances(path) -> list[float]:
    """Variances from a JSON list, ``{"variances": [...]}``, or an estimate report."""
    data = read_json(path)
    if isinstance(data, list):
        vals = data
    elif isinstance(data, dict) and "variances" in data:
        vals = data["variances"]
    elif isinstance(data, dict) and "per_group" in data:
        vals = [g["variance"] for g in data["per_group"]]
    else:
        raise InputError(f"{path}: expected a variance list, {{'variances': [...]}}, or a report")
    try:
        return [float(v) for v in vals]
    except (TypeError, ValueError):
        raise InputError(f"{path}: variances must be numbers") from None


# ---------------------------------------------------------------------------
# Density-matrix dumps: uint32 header length, JSON header, little-endian complex64
# ---------------------------------------------------------------------------


def save_state(rho: DensityMatrix, path) -> None:
    header = json.dumps(
        {"num_qubits": rho.num_qubits, "dtype": "<c8", "layout": "row-major"}
    ).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(rho.data, dtype="<c8").tobytes())


def load_state(path, validate: bool = False) -> DensityMatrix:
    """Read a dump; complex64 storage keeps ~1e-7 precision, so validation is optional."""
    with open(path, "rb") as fh:
        (size,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(size))
        data = np.frombuffer(fh.read(), dtype=header.get("dtype", "<c8"))
    d = 2 ** int(header["num_qubits"])
    if data.size != d * d:
        raise InputError(f"{path}: expected {d * d} entries, found {data.size}")
    return DensityMatrix(data.reshape(d, d).astype(np.complex128), validate=validate)


def load_state_vector(path, num_qubits: int) -> np.ndarray:
    """A ground-state file: JSON list of amplitudes, each a number or ``[re, im]``."""
    data = read_json(path)
    amps = data.get("amplitudes") if isinstance(data, dict) else data
    try:
        vec = np.array([complex(*a) if isinstance(a, list) else complex(a) for a in amps])
    except (TypeError, ValueError):
        raise InputError(f"{path}: amplitudes must be numbers or [re, im] pairs") from None
    if vec.size != 2**num_qubits:
        raise InputError(f"{path}: expected {2**num_qubits} amplitudes, found {vec.size}")
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise InputError(f"{path}: state vector is zero")
    return vec / norm
