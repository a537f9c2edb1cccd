import json
import math

import numpy as np
import pytest
from scipy.linalg import expm

from frozen import ROUND_TRIP_BOUND
from oracles import dense_site_operator, pattern_oracle
from lattice_addressing import register as rp
from lattice_addressing.cli import trial_rng
from lattice_addressing.errors import GeometryError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
PLUS = np.array([1, 1, 0]) / math.sqrt(2)


def embed2(u2):
    """2x2 qubit operator extended to (a, b, q) with q untouched."""
    u = np.eye(3, dtype=complex)
    u[:2, :2] = u2
    return u


def random_qubit_register(n, rng):
    """Random (generally entangled) register with no q population."""
    psi = np.zeros((3,) * n, dtype=complex)
    sub = rng.normal(size=(2,) * n) + 1j * rng.normal(size=(2,) * n)
    psi[(slice(0, 2),) * n] = sub / np.linalg.norm(sub)
    reg = rp.new_register(n)
    reg.amplitudes = psi
    return reg


def same_up_to_phase(x, y, tol):
    x, y = np.ravel(x), np.ravel(y)
    ov = np.vdot(x, y)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return np.max(np.abs(x * phase - y)) < tol


def site_state(reg, s):
    """Pure state of site s in a product register."""
    rho = reg.reduced_density_matrix(s)
    w, v = np.linalg.eigh(rho)
    return v[:, -1] * math.sqrt(w[-1])


class TestNewRegister:
    def test_all_a(self):
        r = rp.new_register(3, "a")
        assert r.vector()[0] == 1 and r.norm_squared == 1.0

    def test_pattern_amplitudes(self):
        r = rp.new_register(2, ["b", "+"])
        nz = np.flatnonzero(r.vector())
        assert rp.basis_labels(2)[nz[0]] == "ba" and rp.basis_labels(2)[nz[1]] == "bb"
        assert np.allclose(r.vector()[nz], 1 / math.sqrt(2))

    def test_cap(self):
        with pytest.raises(ValueError):
            rp.new_register(13)
        with pytest.raises(ValueError):
            rp.new_register(3, ["a", "b"])

    def test_vector_patterns(self):
        r = rp.new_register(1, [[3, 4]])
        assert np.allclose(r.vector(), [0.6, 0.8, 0])
        with pytest.raises(ValueError):
            rp.new_register(1, ["z"])

    def test_empty_sites_fixed(self):
        r = rp.new_register(3, "b", occupancy=[True, False, True])
        assert r.site_populations()[1].tolist() == [1.0, 0.0, 0.0]


class TestQuench:
    def test_all_a_unchanged(self):
        r = rp.new_register(5, "a")
        assert np.array_equal(rp.apply_quench(r, 2, 4).amplitudes, r.amplitudes)

    def test_all_b(self):
        r = rp.apply_quench(rp.new_register(5, "b"), 2, 4)
        chi = rp.REFERENCE_TRANSFER_PHASE
        idx = tuple([2, 2, 1, 2, 2])
        assert r.amplitudes[idx] == pytest.approx(np.exp(4j * chi), abs=1e-14)
        pops = r.site_populations()
        assert np.all(pops[[0, 1, 3, 4], 1] == 0)
        assert pops[2, 1] == 1.0

    def test_ideal_round_trip(self, rng):
        r = random_qubit_register(4, rng)
        back = rp.apply_inverse_quench(rp.apply_quench(r, 1, 2), 1, 2)
        assert np.max(np.abs(back.amplitudes - r.amplitudes)) < 1e-12

    def test_inverse_identity_without_b_or_q(self):
        r = rp.new_register(4, ["a", "b", "a", "a"])
        out = rp.apply_inverse_quench(r, 1, 1)
        assert np.array_equal(out.amplitudes, r.amplitudes)

    def test_input_not_mutated(self):
        r = rp.new_register(3, "b")
        before = r.amplitudes.copy()
        rp.apply_quench(r, 0, 1)
        assert np.array_equal(r.amplitudes, before) and r.history == []

    def test_simulated_round_trip_per_site(self):
        for s in (0, 1, 3, 4):
            occ = [i == s for i in range(5)]
            r = rp.new_register(5, "+", occ)
            out = rp.apply_inverse_quench(rp.apply_quench(r, 2, 4, "simulated"), 2, 4, "simulated")
            f = (PLUS @ out.reduced_density_matrix(s) @ PLUS).real
            assert f >= ROUND_TRIP_BOUND
            assert out.norm_squared + out.norm_deficit == pytest.approx(1.0, abs=1e-6)

    def test_simulated_residual_b(self):
        r = rp.apply_quench(rp.new_register(5, "b"), 2, 4, "simulated")
        pops = r.site_populations()
        assert np.all(pops[[0, 1, 3, 4], 1] < 1 - 0.9)
        assert pops[2, 1] == pytest.approx(r.norm_squared, rel=1e-12)


class TestRotations:
    def test_rz_zero(self, rng):
        r = random_qubit_register(3, rng)
        assert np.allclose(rp.rotate_z(r, 1, 4, 0.0).amplitudes, r.amplitudes, atol=1e-14)

    def test_rz_pi_example(self):
        r = rp.rotate_z(rp.new_register(3, "+"), 1, 4, math.pi)
        assert same_up_to_phase(site_state(r, 1), np.array([1, -1, 0]) / math.sqrt(2), 1e-12)
        for s in (0, 2):
            assert same_up_to_phase(site_state(r, s), PLUS, 1e-12)

    def test_rz_composes(self, rng):
        r = random_qubit_register(3, rng)
        a = rp.rotate_z(rp.rotate_z(r, 0, 2, 0.7), 0, 2, -1.9)
        b = rp.rotate_z(r, 0, 2, 0.7 - 1.9)
        assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-12

    def test_rz_matches_definition(self, rng):
        r = random_qubit_register(3, rng)
        alpha = 1.234
        expected = dense_site_operator(embed2(expm(-0.5j * alpha * np.diag([1, -1]))), 2, 3)
        out = rp.rotate_z(r, 2, 3, alpha)
        assert np.max(np.abs(out.vector() - expected @ r.vector())) < 1e-12

    def test_hadamard(self):
        r = rp.new_register(1, "a")
        assert np.allclose(rp.collective_hadamard(r).vector(), PLUS)
        q = rp.new_register(1, "q")
        assert np.array_equal(rp.collective_hadamard(q).vector(), q.vector())

    def test_hadamard_involution(self, rng):
        r = random_qubit_register(3, rng)
        twice = rp.collective_hadamard(rp.collective_hadamard(r))
        assert np.max(np.abs(twice.amplitudes - r.amplitudes)) < 1e-12

    def test_rx_zero_and_pi(self):
        r = rp.new_register(2, "a")
        assert np.allclose(rp.rotate_x(r, 0, 1, 0.0).amplitudes, r.amplitudes, atol=1e-14)
        out = rp.rotate_x(r, 0, 1, math.pi)
        assert out.amplitudes[1, 0] == pytest.approx(-1j, abs=1e-12)

    def test_rx_against_dense(self, rng):
        r = random_qubit_register(2, rng)
        beta = 0.81
        u = dense_site_operator(embed2(expm(-0.5j * beta * SX)), 1, 2)
        out = rp.rotate_x(r, 1, 2, beta)
        assert np.max(np.abs(out.vector() - u @ r.vector())) < 1e-10

    def test_local_ops_keep_product_states(self):
        r = rp.new_register(4, ["+", "a", "-", "b"])
        for out in (rp.rotate_z(r, 1, 2, 0.4), rp.rotate_x(r, 2, 1, 1.1),
                    rp.apply_quench(r, 0, 2)):
            for cut in range(1, 4):
                assert rp.schmidt_rank(out, cut) == 1

    def test_quench_locality(self):
        # sublattice of k = 1, L = 3 is {1, 5}; site 5 must not notice anything
        r = rp.new_register(9, ["+", "-", "a", "b", "+", "-", "+", "a", "b"])
        eps = np.finfo(float).eps
        out = rp.rotate_z(r, 1, 3, 0.9)
        # no operator touches site 5; the partial trace over the phase-rotated
        # sites is the only source of rounding
        assert np.max(np.abs(out.reduced_density_matrix(5) - r.reduced_density_matrix(5))) <= 4 * eps
        # the global Hadamards of R_x cancel only to rounding
        out = rp.rotate_x(r, 1, 3, 0.3)
        assert np.max(np.abs(out.reduced_density_matrix(5) - r.reduced_density_matrix(5))) < 1e-14

    def test_simulated_rz_logs_neighbour_population(self):
        r = rp.rotate_z(rp.new_register(3, "+"), 1, 4, 0.5, "simulated")
        entry = [h for h in r.history if h["op"] == "rotate_z"][0]
        assert set(entry["neighbor_b_population"]) == {0, 2}
        assert max(entry["neighbor_b_population"].values()) < 1e-3


class TestEuler:
    def test_decomposition_reconstructs(self, rng):
        for _ in range(20):
            h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            u = expm(1j * (h + h.conj().T))
            al, be, ga, ph = rp.euler_zxz(u)
            rebuilt = np.exp(1j * ph) * rp.rz_matrix(al) @ rp.rx_matrix(be) @ rp.rz_matrix(ga)
            assert np.max(np.abs(rebuilt - u)) < 1e-10

    def test_at_most_three_pairs(self, rng):
        r = random_qubit_register(2, rng)
        for u in (np.eye(2), rp.rz_matrix(0.3), rp.rx_matrix(1.0),
                  rp.rz_matrix(0.2) @ rp.rx_matrix(0.5) @ rp.rz_matrix(-0.7)):
            out = rp.arbitrary_rotation(r, 0, 1, u)
            pairs = out.history[-1]["quench_pairs"]
            assert pairs <= 3
            assert same_up_to_phase(out.vector(), dense_site_operator(embed2(u), 0, 2) @ r.vector(),
                                    1e-10)
        assert rp.arbitrary_rotation(r, 0, 1, np.eye(2)).history[-1]["quench_pairs"] == 0

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            rp.euler_zxz(np.ones((2, 2)))


class TestCphase:
    def test_control_a_identity(self):
        r = rp.new_register(2, ["a", "+"])
        assert np.allclose(rp.collective_cphase(r, 0, 1).amplitudes, r.amplitudes, atol=1e-14)

    def test_bb_sign(self):
        r = rp.collective_cphase(rp.new_register(2, "b"), 0, 1)
        assert r.amplitudes[1, 1] == pytest.approx(-1.0, abs=1e-14)

    def test_involution(self, rng):
        r = random_qubit_register(3, rng)
        twice = rp.collective_cphase(rp.collective_cphase(r, 0, 2), 0, 2)
        assert np.max(np.abs(twice.amplitudes - r.amplitudes)) < 1e-12

    def test_against_dense(self, rng):
        r = random_qubit_register(3, rng)
        cz = np.diag([1, 1, 1, 1, -1, 1, 1, 1, 1]).astype(complex)  # |b>|b> on (0, 1)
        u = np.kron(cz, np.eye(3))
        out = rp.collective_cphase(r, 0, 2)
        assert np.max(np.abs(out.vector() - u @ r.vector())) < 1e-10

    def test_needs_right_neighbour(self):
        with pytest.raises(GeometryError):
            rp.collective_cphase(rp.new_register(3, "b"), 0, 1)


def controlled_rx_oracle(alpha, k, n):
    pa = np.diag([1, 0, 0]).astype(complex)
    pb = np.diag([0, 1, 0]).astype(complex)
    rx = lambda t: embed2(expm(-0.5j * t * SX))
    ctrl = (dense_site_operator(pa, k, n)
            + dense_site_operator(pb, k, n) @ dense_site_operator(rx(alpha), k + 1, n))
    return ctrl @ dense_site_operator(rx(-alpha / 2), k + 1, n)


class TestControlledRotation:
    def test_zero(self, rng):
        r = random_qubit_register(2, rng)
        out = rp.controlled_rotation(r, 0, 1, 0.0)
        assert np.max(np.abs(out.amplitudes - r.amplitudes)) < 1e-12

    def test_control_b_pi(self):
        out = rp.controlled_rotation(rp.new_register(2, ["b", "a"]), 0, 1, math.pi)
        expected = rp.new_register(2, ["b", [1, -1j]])
        assert same_up_to_phase(out.vector(), expected.vector(), 1e-12)

    def test_entangles(self):
        out = rp.controlled_rotation(rp.new_register(2, ["+", "a"]), 0, 1, math.pi)
        assert rp.entanglement_entropy(out, [0]) > 0.1

    def test_against_dense(self, rng):
        r = random_qubit_register(3, rng)
        alpha = 2.2
        out = rp.controlled_rotation(r, 0, 2, alpha)
        assert np.max(np.abs(out.vector() - controlled_rx_oracle(alpha, 0, 3) @ r.vector())) < 1e-10

    def test_needs_target_site(self):
        with pytest.raises(GeometryError):
            rp.controlled_rotation(rp.new_register(2), 1, 1, 0.3)


class TestPatternLoad:
    def test_example(self):
        assert rp.pattern_load(10, 2, 4) == [2, 7]

    def test_reach_one(self):
        assert rp.pattern_load(4, 0, 1) == [0, 2]

    def test_single_representative(self):
        assert rp.pattern_load(5, 0, 7) == [0]

    def test_random_against_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 60))
            k = int(rng.integers(0, n))
            reach = int(rng.integers(1, 20))
            assert set(rp.pattern_load(n, k, reach)) == pattern_oracle(n, k, reach)

    def test_simulated_matches_ideal(self):
        assert rp.pattern_load(10, 2, 4, "simulated") == [2, 7]

    def test_loaded_register(self):
        r = rp.load_pattern_register(10, 2, 4)
        assert np.flatnonzero(r.occupancy).tolist() == [2, 7]


class TestMeasure:
    def test_b_always_bright(self):
        r = rp.new_register(3, "b")
        assert all(rp.measure_site(r, 1, 4, trial_rng(1, i))[0] == "bright" for i in range(50))

    def test_half_half_statistics(self):
        r = rp.new_register(3, ["a", "+", "b"])
        n = 10_000
        bright = sum(rp.measure_site(r, 1, 4, trial_rng(7, i))[0] == "bright" for i in range(n))
        assert abs(bright / n - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_neighbour_protected(self):
        r = rp.new_register(3, ["b", "a", "+"])
        for i in range(20):
            outcome, out = rp.measure_site(r, 1, 4, trial_rng(3, i))
            assert outcome == "dark"
            assert np.max(np.abs(out.amplitudes - r.amplitudes)) < 1e-12

    def test_collapse(self):
        outcome, out = rp.measure_site(rp.new_register(2, "+"), 0, 1, seed=0)
        expected = "b" if outcome == "bright" else "a"
        assert same_up_to_phase(site_state(out, 0), rp.new_register(1, expected).vector(), 1e-12)
        assert same_up_to_phase(site_state(out, 1), PLUS, 1e-12)

    def test_seed_determinism(self):
        r = rp.new_register(2, "+")
        a = [rp.measure_site(r, 0, 1, seed=s)[0] for s in range(30)]
        b = [rp.measure_site(r, 0, 1, seed=s)[0] for s in range(30)]
        assert a == b

    def test_empty_site(self):
        with pytest.raises(ValueError):
            rp.measure_site(rp.new_register(2, occupancy=[False, True]), 0, 1)


class TestPump:
    SITE = [[math.sqrt(0.99), 0, 0.1]]

    def test_no_q_unchanged(self):
        r = rp.new_register(2, "+")
        out = rp.optical_pump(r)
        assert np.array_equal(out.amplitudes, r.amplitudes)
        assert out.history[-1]["leakage"] == 0.0

    def test_deterministic(self):
        out = rp.optical_pump(rp.new_register(1, self.SITE))
        assert out.history[-1]["leakage"] == pytest.approx(0.01)
        assert out.norm_deficit == pytest.approx(0.01)
        assert np.allclose(out.conditional_state(), [1, 0, 0])

    def test_trajectory_statistics(self):
        r = rp.new_register(1, self.SITE)
        n = 10_000
        hits = sum(bool(rp.optical_pump(r, trial_rng(11, i), "trajectory").history[-1]["pumped_sites"])
                   for i in range(n))
        assert abs(hits / n - 0.01) <= 0.003

    def test_trajectory_resets_to_target(self):
        r = rp.new_register(1, [[0, 0, 1]])
        assert np.allclose(rp.optical_pump(r, 0, "trajectory").vector(), [1, 0, 0])
        assert np.allclose(rp.optical_pump(r, 0, "trajectory", pump_to="b").vector(), [0, 1, 0])

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            rp.optical_pump(rp.new_register(1), mode="magic")
        with pytest.raises(ValueError):
            rp.optical_pump(rp.new_register(1), pump_to="q")


class TestNormAndSerialization:
    def test_norm_accounting_simulated_sequence(self):
        r = rp.new_register(4, ["+", "b", "-", "+"])
        r = rp.rotate_z(r, 0, 2, 0.3, "simulated")
        r = rp.collective_cphase(r, 0, 3, "simulated")
        r = rp.optical_pump(r)
        assert r.norm_squared + r.norm_deficit == pytest.approx(1.0, abs=1e-6)
        assert r.norm_deficit > 0

    def test_json_round_trip(self, rng):
        r = random_qubit_register(3, rng)
        r.norm_deficit = 0.125
        data = json.loads(json.dumps(r.to_dict()))
        back = rp.LatticeRegister.from_dict(data)
        assert np.max(np.abs(back.amplitudes - r.amplitudes)) < 1e-15
        assert back.norm_deficit == 0.125

    def test_threshold(self):
        r = rp.new_register(1, [[1, 1e-10, 0]])
        assert [e[0] for e in r.to_dict()["amplitudes"]] == ["a"]
