import math
import threading

import numpy as np
import pytest

from measopt.device import (
    DEFAULT_PRESET_QUBITS,
    PRESET_NOISE,
    CouplingGraph,
    NoiseParameters,
    all_pairs_distances,
    complete,
    generate_topology,
    heavy_hex,
    heavy_hex_lattice,
    max_pairwise_distance,
    preset_device,
    random_regular,
    ring,
    scale_noise,
)
from measopt.errors import GenerationError, InputError
from oracles import floyd_warshall


def has_triangle(g: CouplingGraph) -> bool:
    for i, j in g.edges:
        if set(g.neighbors(i)) & set(g.neighbors(j)):
            return True
    return False


class TestDistances:
    def test_ring_opposite(self):
        assert all_pairs_distances(ring(4))[0, 2] == 2

    def test_complete_all_one(self):
        d = all_pairs_distances(complete(4))
        assert (d[~np.eye(4, dtype=bool)] == 1).all()

    def test_disconnected_is_inf(self):
        g = CouplingGraph(4, [(0, 1), (2, 3)])
        assert math.isinf(all_pairs_distances(g)[0, 2])
        assert not g.is_connected()

    def test_cached_and_read_only(self):
        g = ring(5)
        assert g.dist is g.dist
        with pytest.raises(ValueError):
            g.dist[0, 1] = 7

    def test_single_computation_under_threads(self):
        g = ring(30)
        results = []
        threads = [threading.Thread(target=lambda: results.append(id(g.dist))) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(set(results)) == 1

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_floyd_warshall(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 13))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3]
        g = CouplingGraph(n, edges)
        assert np.array_equal(all_pairs_distances(g), floyd_warshall(n, edges))

    def test_triangle_inequality(self, rng):
        g = random_regular(12, 3, rng)
        d = g.dist
        assert (d[:, None, :] <= d[:, :, None] + d[None, :, :]).all()

    def test_symmetric_zero_diagonal(self):
        d = heavy_hex(14).dist
        assert np.array_equal(d, d.T)
        assert (np.diag(d) == 0).all()


class TestMaxPairwise:
    def test_ring(self):
        assert max_pairwise_distance(ring(6), {0, 3}) == 3

    def test_complete(self):
        assert max_pairwise_distance(complete(5), {0, 2, 4}) == 1

    def test_singleton_and_empty(self):
        assert max_pairwise_distance(ring(6), {4}) == 0
        assert max_pairwise_distance(ring(6), set()) == 0

    def test_out_of_range(self):
        with pytest.raises(InputError):
            max_pairwise_distance(ring(4), {0, 9})

    def test_disconnected(self):
        g = CouplingGraph(4, [(0, 1), (2, 3)])
        assert math.isinf(max_pairwise_distance(g, {0, 3}))


class TestGraphValidation:
    def test_self_loop(self):
        with pytest.raises(InputError):
            CouplingGraph(3, [(1, 1)])

    def test_out_of_range_edge(self):
        with pytest.raises(InputError):
            CouplingGraph(3, [(0, 3)])

    def test_duplicate_edges_collapse(self):
        assert len(CouplingGraph(3, [(0, 1), (1, 0)]).edges) == 1


class TestTopologies:
    def test_ring_edges(self):
        assert generate_topology("ring", 4, seed=123).edges == {(0, 1), (1, 2), (2, 3), (0, 3)}

    def test_complete_edges(self):
        assert len(generate_topology("complete", 5).edges) == 10

    def test_random_regular_degrees(self):
        g = generate_topology("random_regular", 12, degree=3, seed=7)
        assert all(g.degree(v) == 3 for v in range(12))
        assert g.is_connected()

    def test_random_regular_deterministic(self):
        a = generate_topology("random_regular", 10, degree=4, seed=3)
        b = generate_topology("random_regular", 10, degree=4, seed=3)
        assert a.sorted_edges() == b.sorted_edges()

    def test_random_regular_parity(self):
        with pytest.raises(InputError):
            generate_topology("random_regular", 5, degree=3)

    def test_random_regular_degree_too_large(self):
        with pytest.raises(InputError):
            generate_topology("random_regular", 5, degree=5)

    def test_random_regular_needs_degree(self):
        with pytest.raises(InputError):
            generate_topology("random_regular", 6)

    def test_random_regular_exhausted(self, monkeypatch):
        import measopt.device as dev

        monkeypatch.setattr(dev, "MAX_REGULAR_ATTEMPTS", 0)
        with pytest.raises(GenerationError):
            random_regular(8, 3, np.random.default_rng(0))

    def test_unknown_kind(self):
        with pytest.raises(InputError):
            generate_topology("torus", 4)

    def test_heavy_hex_lattice_distance_three(self):
        g = heavy_hex_lattice(3)
        assert g.num_qubits == 25
        assert max(g.degree(v) for v in range(25)) == 3
        assert not has_triangle(g)
        assert g.is_connected()

    @pytest.mark.parametrize("n", range(2, 26))
    def test_heavy_hex_subgraphs(self, n):
        g = heavy_hex(n)
        assert g.num_qubits == n
        assert max(g.degree(v) for v in range(n)) <= 3
        assert not has_triangle(g)
        assert g.is_connected()

    def test_heavy_hex_larger_than_distance_three(self):
        g = heavy_hex(40)
        assert g.is_connected() and not has_triangle(g)


class TestNoise:
    def test_preset_table(self):
        s = PRESET_NOISE["sherbrooke"]
        assert (s.p_1q, s.p_2q, s.t1_us, s.t2_us, s.t_1q_us, s.t_2q_us) == (
            0.0002, 0.007, 259.7, 182.3, 0.057, 0.533)
        t = PRESET_NOISE["torino"]
        assert (t.p_1q, t.p_2q, t.t1_us, t.t2_us, t.t_1q_us, t.t_2q_us) == (
            0.0003, 0.003, 160.5, 122.4, 0.032, 0.068)
        a = PRESET_NOISE["aria1"]
        assert (a.p_1q, a.p_2q, a.t1_us, a.t2_us, a.t_1q_us, a.t_2q_us) == (
            0.0006, 0.086, 100e6, 1e6, 135.0, 600.0)
        f = PRESET_NOISE["forte"]
        assert (f.p_1q, f.p_2q, f.t1_us, f.t2_us, f.t_1q_us, f.t_2q_us) == (
            0.0002, 0.010, 100e6, 1e6, 130.0, 970.0)

    def test_preset_topologies(self):
        assert preset_device("forte", 6).graph == complete(6)
        assert preset_device("torino", 8).graph == heavy_hex(8)
        assert preset_device("sherbrooke").num_qubits == DEFAULT_PRESET_QUBITS

    def test_unknown_preset(self):
        with pytest.raises(InputError):
            preset_device("kyoto")

    def test_scale_identity(self):
        base = PRESET_NOISE["sherbrooke"]
        assert scale_noise(base, 1) == base

    def test_scale_ten(self):
        s = scale_noise(PRESET_NOISE["sherbrooke"], 10)
        assert s.p_2q == pytest.approx(0.0007, rel=1e-12)
        assert s.p_1q == pytest.approx(0.00002, rel=1e-12)
        assert s.t1_us == pytest.approx(259.7 * math.log(10))
        assert s.t2_us == pytest.approx(182.3 * math.log(10))
        assert s.t_2q_us == 0.533

    def test_scale_below_one(self):
        with pytest.raises(InputError):
            scale_noise(PRESET_NOISE["torino"], 0.5)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(p_1q=-0.1), dict(p_2q=1.5), dict(t1_us=0.0), dict(t_2q_us=-1.0),
            dict(t1_us=10.0, t2_us=25.0),
        ],
    )
    def test_parameter_validation(self, kwargs):
        base = dict(p_1q=0.001, p_2q=0.01, t1_us=100.0, t2_us=100.0, t_1q_us=0.1, t_2q_us=0.5)
        base.update(kwargs)
        with pytest.raises(InputError):
            NoiseParameters(**base)
