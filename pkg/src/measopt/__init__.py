"""Grouped Pauli measurement: grouping kernels, measurement circuits, noisy estimation."""

from ._kernels import BACKEND
from .circuits import Circuit, CliffordCircuit, RoutedCircuit, cz_adjacency, diagonalize, gate_stats, route
from .device import (
    CouplingGraph,
    DeviceModel,
    NoiseParameters,
    all_pairs_distances,
    generate_topology,
    max_pairwise_distance,
    preset_device,
    scale_noise,
)
from .errors import MeasoptError
from .estimation import (
    KCAL_PER_HARTREE,
    EstimatorReport,
    ShotAllocation,
    allocate_shots,
    bias_report,
    estimate,
    group_variance,
    invert_bound,
    mse,
    relative_error_bound,
)
from .grouping import (
    GroupingContext,
    GroupingKernel,
    MeasurementGroup,
    check_partial_order,
    fc_accepts,
    galic_accepts,
    get_kernel,
    group_observable,
    hec_accepts,
    qwc_accepts,
    sorted_insertion,
)
from .pauli import (
    PauliString,
    WeightedObservable,
    anticommuting_qubits,
    fully_commutes,
    parse_pauli,
    qubitwise_commutes,
    render_pauli,
)
from .simulator import (
    DensityMatrix,
    NoiseChannelSpec,
    apply_circuit,
    expectation,
    grouped_expectations,
    random_pure_state,
    state_fidelity,
)
from .sweep import RegressionSummary, SweepGrid, regress, run_bias_sweep, run_variance_sweep

__version__ = "0.1.0"
