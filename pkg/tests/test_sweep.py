import math

import numpy as np
import pytest

from measopt.circuits import Circuit
from measopt.device import CouplingGraph, DeviceModel, complete, preset_device, scale_noise
from measopt.errors import InputError, RegressionError
from measopt.estimation import estimate
from measopt.grouping import GroupingContext, group_observable
from measopt.pauli import WeightedObservable, parse_pauli
from measopt.simulator import DensityMatrix, NoiseChannelSpec, expectation
from measopt.sweep import (
    STREAMS,
    SweepGrid,
    default_degrees,
    fit_line,
    prepare_ansatz_state,
    regress,
    run_bias_sweep,
    run_variance_sweep,
    stream_rng,
)

P = parse_pauli
TERMS = [(0.6, "ZZII"), (-0.4, "XXII"), (0.3, "YYZZ"), (0.25, "IXXI"), (-0.2, "ZIIZ"), (0.15, "XYYX")]


@pytest.fixture
def observable():
    return WeightedObservable.from_terms(4, [(c, P(s)) for c, s in TERMS])


def labels(groups):
    return [[p.label for p in g.paulis] for g in groups]


class TestStreams:
    def test_reproducible(self):
        a = stream_rng(7, "states", 3).random(4)
        b = stream_rng(7, "states", 3).random(4)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        draws = {name: stream_rng(7, name, 0).random() for name in STREAMS}
        assert len(set(draws.values())) == len(STREAMS)

    def test_keys_differ(self):
        assert stream_rng(1, "cells", 0).random() != stream_rng(1, "cells", 1).random()

    def test_default_degrees(self):
        assert default_degrees(6) == [2, 3, 4, 5]
        assert default_degrees(5) == [2, 4]


class TestFitLine:
    def test_exact_line(self):
        f = fit_line([1, 2, 3, 4], [3, 5, 7, 9])
        assert f.slope == pytest.approx(2) and f.intercept == pytest.approx(1)
        assert f.pearson == pytest.approx(1)

    def test_negative_correlation(self):
        f = fit_line([0, 1, 2], [1.0, 0.4, 0.1])
        assert f.slope < 0 and f.pearson < 0

    def test_constant(self):
        f = fit_line([1, 2, 3], [5, 5, 5])
        assert f.constant and f.slope == 0 and f.pearson == 0

    def test_degenerate_x(self):
        with pytest.raises(RegressionError):
            fit_line([2, 2], [1, 3])


def synthetic_grid(a_d, a_r, noise=0.0, seed=0):
    degrees = [2, 3, 4, 5]
    ratios = [1.0, 10.0, 100.0]
    d = np.array(degrees, dtype=float)[:, None]
    r = np.log10(ratios)[None, :]
    mean = 10 + a_d * d + a_r * r + noise * np.random.default_rng(seed).normal(size=(4, 3))
    z = np.zeros_like(mean)
    return SweepGrid("sample_variance", degrees, ratios, mean, z, z.astype(int), 1, 0)


class TestRegress:
    def test_recovers_slopes(self):
        s = regress(synthetic_grid(-1.5, -7.0))
        assert s.alpha_d == pytest.approx(-1.5)
        assert s.alpha_r == pytest.approx(-7.0)
        assert s.pearson_d == pytest.approx(-1) and s.pearson_r == pytest.approx(-1)

    def test_noisy_pearson_ordering(self):
        s = regress(synthetic_grid(-0.2, -7.0, noise=0.5, seed=3))
        assert abs(s.pearson_r) > abs(s.pearson_d)

    def test_empty_grid(self, observable):
        grid = run_variance_sweep(observable, preset_device("forte", 4), degrees=[])
        assert grid.shape == (0, 3)
        with pytest.raises(RegressionError):
            regress(grid)

    def test_single_ratio(self):
        g = synthetic_grid(1, 1)
        g.ratios = [1.0]
        g.mean = g.mean[:, :1]
        with pytest.raises(RegressionError):
            regress(g)

    def test_to_dict_keys(self):
        d = regress(synthetic_grid(1, 2)).to_dict()
        assert {"alpha_d", "alpha_r", "pearson_d", "pearson_r", "constant_d"} <= set(d)


class TestVarianceSweep:
    def test_shape_and_determinism(self, observable):
        kw = dict(degrees=[2, 3], ratios=[1, 100], states=2, seed=5)
        a = run_variance_sweep(observable, preset_device("sherbrooke", 4), **kw)
        b = run_variance_sweep(observable, preset_device("sherbrooke", 4), **kw)
        assert a.shape == (2, 2)
        assert np.array_equal(a.mean, b.mean) and a.to_csv() == b.to_csv()
        assert (a.count == 2).all()

    def test_trials_recorded(self, observable):
        g = run_variance_sweep(observable, preset_device("forte", 4), degrees=[3], ratios=[1], states=1, trials=3)
        assert [r["trial"] for r in g.records] == [0, 1, 2]

    def test_csv_format(self, observable):
        g = run_variance_sweep(observable, preset_device("forte", 4), degrees=[2, 3], ratios=[1, 10], states=1)
        lines = g.to_csv().splitlines()
        assert lines[0] == "degree,ratio,trial,metric,value"
        assert len(lines) == 1 + 4
        deg, ratio, trial, metric, value = lines[1].split(",")
        assert (deg, float(ratio), trial, metric) == ("2", 1.0, "0", "sample_variance")
        assert math.isfinite(float(value))

    def test_infeasible_degree(self, observable):
        with pytest.raises(InputError):
            run_variance_sweep(observable, preset_device("forte", 4), degrees=[4], ratios=[1], states=1)

    def test_bad_ratio(self, observable):
        with pytest.raises(InputError):
            run_variance_sweep(observable, preset_device("forte", 4), degrees=[2], ratios=[0.5], states=1)


class TestKernelLimits:
    def test_galic_is_fc_on_complete_with_quiet_noise(self, observable):
        dev = DeviceModel("k4", complete(4), scale_noise(preset_device("forte", 4).noise, 100))
        ctx = GroupingContext(dev, 0.01)
        assert labels(group_observable(observable, "galic", ctx)) == labels(group_observable(observable, "fc"))

    def test_galic_is_qwc_when_p_exceeds_target(self, observable):
        ctx = GroupingContext(preset_device("aria1", 4), 0.01)
        assert labels(group_observable(observable, "galic", ctx)) == labels(group_observable(observable, "qwc"))


class TestBiasSweep:
    ansatz = Circuit.from_list(4, [["H", 0], ["CNOT", 0, 1], ["RY", 2, 0.7], ["CNOT", 2, 3], ["CNOT", 1, 2]])

    def test_ideal_limit(self, observable):
        g = run_bias_sweep(self.ansatz, observable, preset_device("torino", 4), degrees=[2, 3], ratios=[1, 10], noise_mode="ideal")
        assert np.allclose(g.mean, 0, atol=1e-12)

    def test_empty_ansatz_validation_closed_form(self, observable):
        base = preset_device("torino", 4)
        g = run_bias_sweep(Circuit(4), observable, base, degrees=[3], ratios=[1, 10], noise_mode="validation")
        for j, r in enumerate([1, 10]):
            dev = DeviceModel("k4", complete(4), scale_noise(base.noise, r))
            groups = group_observable(observable, "galic", GroupingContext(dev, 0.01))
            rho = DensityMatrix.zero_state(4)
            p = dev.noise.p_2q
            expected = sum(
                c * expectation(rho, q) * ((1 - p) ** grp.n_2q - 1)
                for grp in groups for q, c in zip(grp.paulis, grp.coeffs)
            )
            assert g.mean[0, j] == pytest.approx(expected, abs=1e-10)

    def test_prepare_state_logical_order(self):
        graph = complete(4)
        ideal, noisy = prepare_ansatz_state(self.ansatz, graph, NoiseChannelSpec.ideal())
        assert np.allclose(ideal.data, noisy.data, atol=1e-12)

    def test_prepare_state_routed_path(self):
        path = CouplingGraph(4, [(0, 1), (1, 2), (2, 3)])
        a = Circuit.from_list(4, [["H", 0], ["CNOT", 0, 3], ["X", 1]])
        ideal, noisy = prepare_ansatz_state(a, path, NoiseChannelSpec.ideal())
        assert np.allclose(ideal.data, noisy.data, atol=1e-12)

    def test_width_mismatch(self, observable):
        with pytest.raises(InputError):
            run_bias_sweep(Circuit(3), observable, preset_device("torino", 4))

    def test_estimate_unbiased_without_noise(self, observable):
        rho = DensityMatrix.from_vector(np.ones(16) / 4)
        rep = estimate(rho, group_observable(observable, "qwc"))
        assert rep.bias == pytest.approx(0, abs=1e-12)
