"""Command-line front end: ``measopt group|estimate|allocate|sweep|devices``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .device import PRESET_NOISE, PRESET_TOPOLOGY, TOPOLOGIES, DeviceModel, generate_topology
from .errors import CapacityError, ConfigurationError, InputError, MeasoptError
from .estimation import allocate_shots, estimate
from .grouping import KERNEL_NAMES, GroupingContext, group_observable, get_kernel
from .simulator import (
    MAX_QUBITS,
    DensityMatrix,
    NoiseChannelSpec,
    apply_circuit,
    random_state_vector,
)
from .sweep import DEFAULT_RATIOS, regress, run_bias_sweep, run_variance_sweep, stream_rng

NOISE_MODES = ("ideal", "validation", "device")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser, device_default=None) -> None:
    p.add_argument("--observable", required=True, help="observable JSON file")
    p.add_argument("--device", default=device_default, help="preset name or device JSON file")
    p.add_argument("--kernel", default="fc", choices=KERNEL_NAMES)
    p.add_argument("--epsilon-target", type=float, default=0.01)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="output path (stdout when omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="measopt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("group", help="group an observable and synthesize measurement circuits")
    _common(p)

    p = sub.add_parser("estimate", help="simulate grouped measurement and report bias/variance")
    _common(p)
    p.add_argument("--noise", default="device", choices=NOISE_MODES)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--state", help="ground-state amplitudes JSON file")
    src.add_argument("--ansatz", help="state-preparation circuit JSON file")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--shots", type=int, help="total shot budget to allocate")
    budget.add_argument("--precision", type=float, help="target standard error")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--units", default="hartree", choices=sorted(io.UNITS))

    p = sub.add_parser("allocate", help="split a shot budget across groups")
    p.add_argument("--variances", required=True, help="variance list JSON or estimate report")
    budget = p.add_mutually_exclusive_group(required=True)
    budget.add_argument("--shots", type=int)
    budget.add_argument("--precision", type=float)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="degree x noise-ratio design-space sweep")
    _common(p, device_default="sherbrooke")
    p.set_defaults(kernel="galic")
    p.add_argument("--metric", default="variance", choices=("variance", "bias"))
    p.add_argument("--ansatz", help="state-preparation circuit JSON (bias metric)")
    p.add_argument("--degrees", type=_int_list)
    p.add_argument("--ratios", type=_float_list, default=list(DEFAULT_RATIOS))
    p.add_argument("--states", type=int, default=10)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--noise", default="device", choices=NOISE_MODES)

    p = sub.add_parser("devices", help="list, show or generate devices")
    dsub = p.add_subparsers(dest="action", required=True)
    dsub.add_parser("list")
    s = dsub.add_parser("show")
    s.add_argument("name", choices=sorted(PRESET_NOISE))
    s.add_argument("--num-qubits", type=int, default=None)
    s.add_argument("--out")
    g = dsub.add_parser("generate")
    g.add_argument("kind", choices=TOPOLOGIES)
    g.add_argument("num_qubits", type=int)
    g.add_argument("--degree", type=int)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--noise-from", default="sherbrooke", choices=sorted(PRESET_NOISE))
    g.add_argument("--name")
    g.add_argument("--out")
    return parser


def _emit(obj, out) -> None:
    text = io.write_json(obj, out)
    if out is None:
        sys.stdout.write(text)


def _context(args, num_qubits: int) -> GroupingContext:
    device = io.load_device(args.device, num_qubits) if args.device else None
    kernel = get_kernel(args.kernel)
    if kernel.needs_device and device is None:
        raise ConfigurationError(f"kernel {args.kernel!r} needs --device")
    return GroupingContext(device, args.epsilon_target)


def _summary_table(summary: dict) -> str:
    rows = [
        ("groups", f"{summary['groups']}"),
        ("n_2q mean/max", f"{summary['n_2q_mean']:.2f} / {summary['n_2q_max']}"),
        ("depth mean/max", f"{summary['depth_mean']:.2f} / {summary['depth_max']}"),
    ]
    return "\n".join(f"{k:<16}{v}" for k, v in rows) + "\n"


def cmd_group(args) -> int:
    obs = io.load_observable(args.observable)
    ctx = _context(args, obs.num_qubits)
    groups = group_observable(obs, args.kernel, ctx)
    data = io.grouping_to_dict(args.kernel, args.epsilon_target, ctx.device, groups)
    summary = io.grouping_summary(groups)
    data["summary"] = summary
    _emit(data, args.out)
    (sys.stdout if args.out else sys.stderr).write(_summary_table(summary))
    return 0


def _initial_state(args, n: int) -> DensityMatrix:
    if args.state:
        return DensityMatrix.from_vector(io.load_state_vector(args.state, n))
    if args.ansatz:
        circuit = io.load_circuit(args.ansatz)
        if circuit.num_qubits != n:
            raise InputError(f"ansatz has {circuit.num_qubits} qubits, observable {n}")
        return apply_circuit(DensityMatrix.zero_state(n), circuit)
    return DensityMatrix.from_vector(random_state_vector(n, stream_rng(args.seed, "states", 0)))


def cmd_estimate(args) -> int:
    obs = io.load_observable(args.observable)
    if obs.num_qubits > MAX_QUBITS:
        raise CapacityError(f"{obs.num_qubits} qubits exceeds the simulation cap of {MAX_QUBITS}")
    ctx = _context(args, obs.num_qubits)
    if args.noise != "ideal" and ctx.device is None:
        raise ConfigurationError(f"noise mode {args.noise!r} needs --device")
    noise = NoiseChannelSpec.from_mode(args.noise, None if ctx.device is None else ctx.device.noise)
    rho = _initial_state(args, obs.num_qubits)
    groups = group_observable(obs, args.kernel, ctx)
    precisions = (args.precision,) if args.precision else (1e-3, 1.6e-3, 1e-2)
    report = estimate(rho, groups, noise, precisions=precisions, threads=max(1, args.threads))
    if args.shots is not None or args.precision is not None:
        report.attach_allocation(
            allocate_shots(report.variances, budget=args.shots, epsilon=args.precision)
        )
    name = None if ctx.device is None else ctx.device.name
    data = io.report_to_dict(report, args.kernel, name, args.units)
    data["noise"] = args.noise
    _emit(data, args.out)
    return 0


def cmd_allocate(args) -> int:
    variances = io.load_variances(args.variances)
    alloc = allocate_shots(variances, budget=args.shots, epsilon=args.precision)
    _emit(io.allocation_to_dict(alloc, variances), args.out)
    return 0


def cmd_sweep(args) -> int:
    obs = io.load_observable(args.observable)
    if obs.num_qubits > MAX_QUBITS:
        raise CapacityError(f"{obs.num_qubits} qubits exceeds the simulation cap of {MAX_QUBITS}")
    base = io.load_device(args.device, obs.num_qubits)
    common = dict(
        degrees=args.degrees, ratios=args.ratios, epsilon_target=args.epsilon_target,
        seed=args.seed, trials=args.trials, noise_mode=args.noise, kernel=args.kernel,
    )
    if args.metric == "bias":
        if not args.ansatz:
            raise InputError("the bias metric needs --ansatz")
        grid = run_bias_sweep(io.load_circuit(args.ansatz), obs, base, **common)
    else:
        grid = run_variance_sweep(obs, base, states=args.states, **common)
    summary = {"grid": grid.to_dict()}
    try:
        summary["regression"] = regress(grid).to_dict()
    except MeasoptError as exc:
        summary["regression"] = None
        summary["regression_error"] = str(exc)
    if args.out:
        out = Path(args.out)
        out.with_suffix(".csv").write_text(grid.to_csv())
        io.write_json(summary, out.with_suffix(".json"))
    else:
        sys.stdout.write(io.dumps(summary))
    return 0


def cmd_devices(args) -> int:
    if args.action == "list":
        rows = [
            {"name": k, "topology": PRESET_TOPOLOGY[k], **io.noise_to_dict(v)}
            for k, v in PRESET_NOISE.items()
        ]
        sys.stdout.write(io.dumps(rows))
        return 0
    if args.action == "show":
        dev = io.load_device(args.name, args.num_qubits)
        _emit(io.device_to_dict(dev), args.out)
        return 0
    graph = generate_topology(args.kind, args.num_qubits, args.degree, args.seed)
    name = args.name or f"{args.kind}-{args.num_qubits}"
    dev = DeviceModel(name, graph, PRESET_NOISE[args.noise_from])
    _emit(io.device_to_dict(dev), args.out)
    return 0


COMMANDS = {
    "group": cmd_group,
    "estimate": cmd_estimate,
    "allocate": cmd_allocate,
    "sweep": cmd_sweep,
    "devices": cmd_devices,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except MeasoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
