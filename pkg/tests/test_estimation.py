import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from measopt.device import preset_device
from measopt.errors import InputError, NumericalError, StateError
from measopt.estimation import (
    KCAL_PER_HARTREE,
    allocate_shots,
    bias_report,
    estimate,
    fixed_budget_allocation,
    fixed_precision_allocation,
    group_variance,
    invert_bound,
    integer_allocation,
    mse,
    relative_error_bound,
    sample_variance,
    shots_for_precision,
)
from measopt.grouping import GroupingContext, MeasurementGroup, group_observable, random_commuting_set
from measopt.pauli import WeightedObservable, parse_pauli
from measopt.simulator import DensityMatrix, NoiseChannelSpec, simulate_group
from oracles import best_integer_allocation, brute_variance, haar_vector

P = parse_pauli


def total_variance(v, n):
    return float(sum(vi / ni for vi, ni in zip(v, n)))


class TestBounds:
    def test_relative_error(self):
        assert relative_error_bound(0.01, 0) == 0
        assert relative_error_bound(0.01, 1) == pytest.approx(0.01)
        assert relative_error_bound(0.01, 3) == pytest.approx(1 - 0.99**3)

    def test_invert(self):
        assert invert_bound(0.003, 0.01) == pytest.approx(3.3451, rel=1e-4)
        assert invert_bound(0.01, 0.01) == pytest.approx(1.0)
        assert math.isinf(invert_bound(0.0, 0.01))

    def test_round_trip(self):
        for p in (0.001, 0.01, 0.05):
            k = invert_bound(p, 0.02)
            assert 1 - (1 - p) ** k == pytest.approx(0.02)

    @pytest.mark.parametrize("p", [-0.1, 1.0, 1.5])
    def test_domain(self, p):
        with pytest.raises(InputError):
            relative_error_bound(p, 1)
        with pytest.raises(InputError):
            invert_bound(p, 0.01)

    def test_kcal(self):
        assert KCAL_PER_HARTREE == pytest.approx(627.509)


class TestGroupVariance:
    def test_eigenstate_has_zero_variance(self):
        g = MeasurementGroup([P("ZZ"), P("ZI")], [1.0, 0.5])
        assert group_variance(DensityMatrix.zero_state(2), g) == pytest.approx(0)

    def test_single_pauli(self):
        g = MeasurementGroup([P("X")], [2.0])
        assert group_variance(DensityMatrix.zero_state(1), g) == pytest.approx(4.0)

    def test_dense_oracle(self, rng):
        for _ in range(60):
            n = int(rng.integers(1, 5))
            group = random_commuting_set(n, 5, rng)
            coeffs = rng.normal(size=len(group)).tolist()
            rho = DensityMatrix.from_vector(haar_vector(n, rng))
            ref = brute_variance(rho.data, [p.label for p in group], coeffs)
            assert group_variance(rho, MeasurementGroup(group, coeffs)) == pytest.approx(ref, abs=1e-10)

    def test_anticommuting_rejected(self):
        with pytest.raises(NumericalError):
            group_variance(DensityMatrix.zero_state(1), MeasurementGroup([P("X"), P("Z")], [1.0, 1.0]))

    def test_measured_equals_logical_when_ideal(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 5))
            group = random_commuting_set(n, 4, rng)
            coeffs = rng.normal(size=len(group)).tolist()
            rho = DensityMatrix.from_vector(haar_vector(n, rng))
            mg = MeasurementGroup(group, coeffs).synthesize()
            rep = estimate(rho, [mg])
            ref = brute_variance(rho.data, [p.label for p in group], coeffs)
            assert rep.per_group[0].variance == pytest.approx(ref, abs=1e-10)

    def test_noisy_variance_on_measured_forms(self, rng):
        mg = MeasurementGroup([P("XX"), P("ZZ"), P("YY")], [0.7, -0.4, 0.2]).synthesize()
        rho = DensityMatrix.from_vector(haar_vector(2, rng))
        noise = NoiseChannelSpec.validation(0.1)
        sim = simulate_group(rho, mg, noise)
        labels = [z.label for z in sim.physical_zstrings]
        signed = [c * s for c, s in zip(mg.coeffs, sim.signs)]
        ref = brute_variance(sim.rho_tilde.data, labels, signed)
        assert estimate(rho, [mg], noise).per_group[0].variance == pytest.approx(ref, abs=1e-12)


class TestAllocation:
    def test_example_budget(self):
        a = allocate_shots([4, 1], budget=300)
        assert a.shots == (200, 100)
        assert a.fractional == pytest.approx((200.0, 100.0))

    def test_example_precision(self):
        assert shots_for_precision([4, 1], 1.0) == pytest.approx(9.0)
        a = allocate_shots([4, 1], epsilon=1.0)
        assert a.total == pytest.approx(9.0)
        assert a.shots == (6, 3)
        assert total_variance([4, 1], a.shots) <= 1.0 + 1e-12

    def test_precision_target_met_after_rounding(self, rng):
        for _ in range(30):
            v = rng.uniform(0.01, 5, size=int(rng.integers(1, 7)))
            eps = float(rng.uniform(0.05, 1.0))
            a = allocate_shots(v, epsilon=eps)
            assert total_variance(v, a.shots) <= eps**2 * (1 + 1e-12)
            assert sum(a.shots) >= math.ceil(a.total - 1e-9)

    def test_formulations_agree(self, rng):
        for _ in range(20):
            v = rng.uniform(0.01, 5, size=int(rng.integers(1, 7)))
            eps = float(rng.uniform(0.01, 0.5))
            frac = fixed_precision_allocation(v, eps)
            assert total_variance(v, frac) == pytest.approx(eps**2)
            again = fixed_budget_allocation(v, frac.sum())
            assert np.allclose(again, frac)

    def test_closed_form_beats_random_feasible(self, rng):
        for _ in range(50):
            v = rng.uniform(0.01, 5, size=int(rng.integers(2, 7)))
            n = 1000.0
            best = total_variance(v, fixed_budget_allocation(v, n))
            for _ in range(20):
                w = rng.dirichlet(np.ones(v.size)) * n
                assert total_variance(v, w) >= best * (1 - 1e-12)

    def test_closed_form_vs_dynamic_programming(self, rng):
        for _ in range(15):
            v = rng.uniform(0.01, 5, size=int(rng.integers(1, 7)))
            n = int(rng.integers(v.size, 201))
            exact = best_integer_allocation(v, n)
            frac = total_variance(v, fixed_budget_allocation(v, n))
            ints = allocate_shots(v, budget=n).shots
            assert frac <= exact * (1 + 1e-12)
            assert sum(ints) == n
            assert total_variance(v, ints) == pytest.approx(exact, rel=1e-12)

    def test_zero_variance_group_gets_nothing(self):
        a = allocate_shots([0.0, 1.0], budget=10)
        assert a.shots == (0, 10)

    def test_all_zero(self, caplog):
        a = allocate_shots([0.0, 0.0], budget=10)
        assert a.shots == (0, 0)
        assert "zero" in caplog.text

    @pytest.mark.parametrize("kwargs", [{}, {"budget": 10, "epsilon": 0.1}, {"budget": 0}, {"epsilon": -1}])
    def test_bad_arguments(self, kwargs):
        with pytest.raises(InputError):
            allocate_shots([1.0], **kwargs)

    @pytest.mark.parametrize("v", [[], [-1.0], [float("nan")]])
    def test_bad_variances(self, v):
        with pytest.raises(InputError):
            allocate_shots(v, budget=10)

    def test_to_dict(self):
        d = allocate_shots([4, 1], epsilon=1.0).to_dict()
        assert d["formulation"] == "fixed_precision" and d["epsilon"] == 1.0


@given(st.lists(st.floats(0, 20), min_size=1, max_size=6), st.integers(6, 120))
def test_integer_allocation_is_exact(v, total):
    out = integer_allocation(v, total)
    assert out.sum() == (total if any(x > 0 for x in v) else 0)
    assert all((n > 0) == (x > 0) for n, x in zip(out, v))
    achieved = sum(x / n for x, n in zip(v, out) if x > 0)
    assert achieved == pytest.approx(best_integer_allocation(v, total), rel=1e-12, abs=1e-15)


def test_integer_allocation_large_budget():
    v = [4.0, 1.0, 0.25, 1e-6]
    out = integer_allocation(v, 10**7)
    assert out.sum() == 10**7 and out[3] >= 1
    frac = fixed_budget_allocation(v, 10**7)
    assert np.all(np.abs(out - frac) <= 1)


def test_integer_allocation_too_few_shots():
    with pytest.raises(InputError):
        integer_allocation([1.0, 1.0, 1.0], 2)


@given(st.lists(st.floats(0.001, 50), min_size=1, max_size=8), st.integers(10, 10_000))
def test_budget_allocation_invariants(v, budget):
    a = allocate_shots(v, budget=budget)
    assert sum(a.shots) == budget
    assert sum(a.fractional) == pytest.approx(budget)
    root = np.sqrt(v)
    assert np.allclose(np.asarray(a.fractional) / budget, root / root.sum())


class TestMse:
    def test_examples(self):
        assert mse([4, 1], [200, 100]) == pytest.approx(0.03)
        assert mse([4, 1], [200, 100], bias=0.1) == pytest.approx(0.04)

    def test_starved_group(self):
        assert math.isinf(mse([1.0, 1.0], [10, 0]))
        assert mse([0.0, 1.0], [0, 10]) == pytest.approx(0.1)

    def test_sample_variance(self):
        assert sample_variance([4, 1]) == pytest.approx(9)


class TestEstimate:
    def obs(self):
        terms = [(0.5, "ZZII"), (-0.3, "XXII"), (0.2, "IIZZ"), (0.1, "YYXX"), (0.4, "IIII")]
        return WeightedObservable.from_terms(4, [(c, P(s)) for c, s in terms])

    def test_noiseless_is_exact(self, rng):
        o = self.obs()
        rho = DensityMatrix.from_vector(haar_vector(4, rng))
        groups = group_observable(o, "fc")
        rep = estimate(rho, groups)
        exact = np.trace(o.to_matrix() @ rho.data).real
        assert rep.estimate == pytest.approx(exact, abs=1e-10)
        assert rep.bias == pytest.approx(0, abs=1e-10)

    def test_validation_bias(self, rng):
        o = self.obs()
        rho = DensityMatrix.from_vector(haar_vector(4, rng))
        groups = group_observable(o, "fc")
        p = 0.05
        rep = estimate(rho, groups, NoiseChannelSpec.validation(p))
        for g in rep.per_group:
            scale = (1 - p) ** g.n_2q
            expected = sum(c * m * (scale if not lab == "IIII" else 1.0) for c, m, lab in zip(g.coeffs, g.member_ideal, g.paulis))
            assert g.noisy == pytest.approx(expected, abs=1e-10)

    def test_threads_match_serial(self, rng):
        o = self.obs()
        rho = DensityMatrix.from_vector(haar_vector(4, rng))
        groups = group_observable(o, "qwc")
        spec = NoiseChannelSpec.device(preset_device("torino", 2).noise)
        a = estimate(rho, groups, spec)
        b = estimate(rho, groups, spec, threads=4)
        assert a.estimate == b.estimate and a.variances == b.variances

    def test_shots_for_target(self, rng):
        rho = DensityMatrix.from_vector(haar_vector(4, rng))
        rep = estimate(rho, group_observable(self.obs(), "fc"), precisions=(0.01,))
        assert rep.shots_for_target[0.01] == pytest.approx(rep.sample_variance / 1e-4)

    def test_attach_allocation(self, rng):
        rho = DensityMatrix.from_vector(haar_vector(4, rng))
        rep = estimate(rho, group_observable(self.obs(), "qwc"))
        rep.attach_allocation(allocate_shots(rep.variances, budget=1000))
        assert sum(g.shots for g in rep.per_group) == 1000
        assert rep.mse == pytest.approx(rep.sample_variance / 1000)

    def test_bias_report(self, rng):
        rho = DensityMatrix.from_vector(haar_vector(4, rng))
        groups = group_observable(self.obs(), "fc")
        spec = NoiseChannelSpec.validation(0.02)
        sims = [simulate_group(rho, g, spec) for g in groups]
        total, per = bias_report(rho, groups, sims)
        assert total == pytest.approx(estimate(rho, groups, spec).bias)
        with pytest.raises(StateError):
            bias_report(rho, groups, None)

    def test_galic_bias_within_target(self, rng):
        o = self.obs()
        ctx = GroupingContext(preset_device("sherbrooke", 4), 0.01)
        groups = group_observable(o, "galic", ctx)
        rho = DensityMatrix.from_vector(haar_vector(4, rng))
        rep = estimate(rho, groups, NoiseChannelSpec.validation(ctx.device.noise.p_2q))
        for g in rep.per_group:
            assert g.relative_bias <= 0.01 + 1e-12 or abs(g.ideal) < 1e-12
