import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from cvqkd.channel import ChannelConfig, SourceConfig, amplitude_for_overlap, sample_heterodyne_batch
from cvqkd.quantum import MomentSet, UnitConvention
from cvqkd.witness import (
    EvmProblem,
    assemble_evm,
    bound_grid,
    coherence,
    conditional_moment_matrix,
    entanglement_bound,
    min_eigenvalues,
    partial_transpose_alice,
    problem_from_excess,
    problem_from_moments,
    sdp_feasibility_margin,
    witness_from_data,
    witness_from_excess,
)

from . import oracles

ALPHA_051 = 0.5802346737587153


def displaced_thermal(beta, nbar, dim=61):
    """Fock-basis density matrix of D(beta) rho_th D(beta)^dag."""
    pad = oracles.DIM
    a = oracles.ladder(pad)
    D = expm(beta * a.conj().T - np.conj(beta) * a)
    p = (nbar / (1 + nbar)) ** np.arange(pad) / (1 + nbar)
    rho = D @ np.diag(p) @ D.conj().T
    return rho[:dim, :dim]


def oracle_moments(rho, dim=61):
    pad = dim + 4
    _, X, Y = oracles.quadratures(pad)
    R = np.zeros((pad, pad), complex)
    R[:dim, :dim] = rho
    B = [np.eye(pad), X, Y]
    return np.array([[np.trace(R @ B[k].conj().T @ B[l]) for l in range(3)] for k in range(3)])


class TestConditionalMomentMatrix:
    def test_coherent_layout(self):
        a = 0.7
        M = conditional_moment_matrix(MomentSet.coherent(a))
        expected = np.array([[1, a, 0], [a, a * a + 0.25, 0.25j], [0, -0.25j, 0.25]])
        assert np.max(np.abs(M - expected)) < 1e-14
        w = np.linalg.eigvalsh(M)
        assert abs(w[0]) < 1e-14 and w[1] > 1e-3

    def test_vacuum(self):
        M = conditional_moment_matrix(MomentSet.coherent(0.0))
        assert np.max(np.abs(M - np.array([[1, 0, 0], [0, 0.25, 0.25j], [0, -0.25j, 0.25]]))) < 1e-15

    @given(st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
    @settings(max_examples=30, deadline=None)
    def test_coherent_matches_fock(self, a):
        psi = oracles.coherent_ket(a)
        M = conditional_moment_matrix(MomentSet.coherent(a))
        assert np.max(np.abs(M - oracles.moment_matrix(psi, psi))) < 1e-8

    @pytest.mark.parametrize("beta,nbar", [(0.3, 0.1), (-0.5 + 0.4j, 0.3), (1.2j, 0.05)])
    def test_thermal_matches_fock(self, beta, nbar):
        # displaced thermal: operator variance (2 nbar + 1) / 4, plus 1/4 of added heterodyne vacuum
        v = (2 * nbar + 1) / 4 + 0.25
        m = MomentSet(np.real(beta), np.imag(beta), v, v, 0.0, UnitConvention.NATURAL)
        M = conditional_moment_matrix(m)
        ref = oracle_moments(displaced_thermal(beta, nbar))
        assert np.max(np.abs(M - ref)) < 1e-8
        assert np.linalg.eigvalsh(M)[0] >= -1e-9

    def test_rejects_below_vacuum_floor(self):
        with pytest.raises(ValueError):
            conditional_moment_matrix(MomentSet(0, 0, 0.5, 1.0, 0.0))

    def test_tiny_negative_excess_is_projected(self):
        m = MomentSet.from_quadrature_excess(0.4, -0.004, -0.004, n_samples=125000)
        M = conditional_moment_matrix(m)
        assert np.linalg.eigvalsh(M)[0] >= -1e-12
        with pytest.raises(ValueError):
            conditional_moment_matrix(MomentSet.from_quadrature_excess(0.4, -0.5, -0.5, n_samples=125000))


class TestAssembly:
    def test_block_diagonal(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((3, 3))
        B0, B1 = A @ A.T, np.diag([1.0, 2.0, 3.0])
        p = EvmProblem(B0, B1, 0.0)
        chi = assemble_evm(p, np.zeros((3, 3)))
        assert np.allclose(np.linalg.eigvalsh(chi), np.sort(np.concatenate([np.linalg.eigvalsh(B0), [1, 2, 3]])))

    def test_hermitian(self):
        rng = np.random.default_rng(2)
        H = [(lambda A: A + A.conj().T)(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) for _ in range(2)]
        D = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        D[0, 0] = 0.2
        chi = assemble_evm(EvmProblem(H[0], H[1], 0.2), D)
        assert np.array_equal(chi, chi.conj().T)

    def test_rejects_wrong_corner(self):
        p = EvmProblem(np.eye(3), np.eye(3), 0.25)
        with pytest.raises(ValueError):
            assemble_evm(p, np.zeros((3, 3)))

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            EvmProblem(np.eye(3), np.eye(3), 0.6)
        with pytest.raises(ValueError):
            EvmProblem(np.eye(2), np.eye(3), 0.1)
        with pytest.raises(ValueError):
            EvmProblem(np.eye(3), np.triu(np.ones((3, 3))), 0.1)

    def test_pure_effective_state_is_psd(self):
        a = ALPHA_051
        minus, plus = oracles.coherent_ket(-a), oracles.coherent_ket(a)
        B0 = 0.5 * oracles.moment_matrix(minus, minus)
        B1 = 0.5 * oracles.moment_matrix(plus, plus)
        D = 0.5 * oracles.moment_matrix(minus, plus)
        p = EvmProblem(B0, B1, 0.5 * 0.51)
        assert D[0, 0].real == pytest.approx(0.255, abs=1e-12)
        chi_min, pt_min = min_eigenvalues(p, D)
        assert chi_min >= -1e-9
        # the same completion violates positivity after partial transposition
        assert pt_min < -1e-3


class TestPartialTranspose:
    def test_involution(self):
        chi = np.arange(36).reshape(6, 6) + 1j * np.arange(36).reshape(6, 6).T
        assert np.array_equal(partial_transpose_alice(partial_transpose_alice(chi)), chi)

    def test_block_diagonal_fixed_point(self):
        chi = np.zeros((6, 6), complex)
        chi[:3, :3] = np.eye(3)
        chi[3:, 3:] = 2 * np.eye(3)
        assert np.array_equal(partial_transpose_alice(chi), chi)

    def test_product_completion_is_ppt(self):
        # rho_A (x) |beta><beta|: chi = rho_A (x) M(beta) and its partial transpose rho_A^T (x) M(beta)
        beta = 0.4 - 0.3j
        psi = oracles.coherent_ket(beta)
        M = oracles.moment_matrix(psi, psi)
        rho_a = np.array([[0.5, 0.2 - 0.1j], [0.2 + 0.1j, 0.5]])
        p = EvmProblem(rho_a[0, 0] * M, rho_a[1, 1] * M, rho_a[0, 1])
        chi_min, pt_min = min_eigenvalues(p, rho_a[0, 1] * M)
        assert chi_min >= -1e-9 and pt_min >= -1e-9


class TestVerdicts:
    def test_ideal_states_entangled(self):
        v = witness_from_excess(1.0, 0.51, 0.0)
        assert v.entangled and v.label == "entangled"
        assert v.t_star < -1e-7

    def test_identical_states_inconclusive(self):
        for T in (1.0, 0.457):
            p = problem_from_excess(T, 1.0, 0.0)
            assert p.c == 0.5 and np.allclose(p.B0, p.B1)
            assert min(min_eigenvalues(p, p.B0)) >= -1e-12
            assert sdp_feasibility_margin(p).label == "inconclusive"

    def test_large_noise_inconclusive_with_explicit_completion(self):
        v = witness_from_excess(0.457, 0.51, 1.0)
        assert v.label == "inconclusive"
        p = problem_from_excess(0.457, 0.51, 1.0)
        chi_min, pt_min = min_eigenvalues(p, v.completion)
        assert chi_min >= -p.tolerance and pt_min >= -p.tolerance

    def test_entangled_survives_random_probe(self):
        p = problem_from_excess(0.457, 0.5, 0.05)
        v = sdp_feasibility_margin(p)
        assert v.entangled
        rng = np.random.default_rng(3)
        for k in range(1000):
            scale = 0.01 if k < 500 else 1.0
            D = v.completion + scale * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
            D[0, 0] = p.c
            assert min(min_eigenvalues(p, D)) < -p.tolerance

    def test_single_switch_along_E(self):
        verdicts = [witness_from_excess(0.457, 0.5, E).entangled for E in np.linspace(0, 0.4, 20)]
        assert verdicts[0] and not verdicts[-1]
        assert sum(a != b for a, b in zip(verdicts, verdicts[1:])) == 1

    def test_unit_convention_invariance(self):
        a = amplitude_for_overlap(0.5) * math.sqrt(0.65)
        ms = [MomentSet.from_quadrature_excess(s * a, 0.06, 0.04, convention=UnitConvention.NATURAL) for s in (-1, 1)]
        nat = sdp_feasibility_margin(problem_from_moments(*ms, 0.5, 0.65))
        snu = sdp_feasibility_margin(problem_from_moments(*(m.to(UnitConvention.SNU) for m in ms), 0.5, 0.65))
        assert nat.t_star == pytest.approx(snu.t_star, abs=1e-10)
        assert nat.entangled == snu.entangled

    def test_asymmetric_excess(self):
        sym = witness_from_excess(0.483, 0.52, 0.08)
        asym = witness_from_excess(0.483, 0.52, 0.08, 0.02)
        assert asym.t_star <= sym.t_star + 1e-9

    def test_coherence_modes(self):
        assert coherence(0.5) == 0.25
        assert coherence(0.5, 0.5, "channel") == pytest.approx(0.5 * math.sqrt(0.5))
        with pytest.raises(ValueError):
            coherence(0.5, 1.0, "bogus")


@pytest.fixture(scope="module")
def setup():
    return SourceConfig(target_overlap=0.5, pulse_count=250000, seed=2024)


class TestFromData:
    def test_noiseless_entangled(self, setup):
        batch = sample_heterodyne_batch(setup, ChannelConfig(0.457))
        v = witness_from_data(batch, setup, 0.457)
        assert v.label == "entangled"
        assert v.inputs["n0"] + v.inputs["n1"] == 250000

    def test_noisy_inconclusive(self, setup):
        batch = sample_heterodyne_batch(setup, ChannelConfig(0.457, 0.5))
        assert witness_from_data(batch, setup, 0.457).label == "inconclusive"


class TestBounds:
    def test_bisection_consistency(self):
        b = entanglement_bound(0.457, 0.5)
        assert b.E_max >= 0.10
        ent = [E for E, e in b.points if e]
        inc = [E for E, e in b.points if not e]
        assert max(ent) == b.E_max and min(inc) - b.E_max <= b.resolution
        assert max(ent) < min(inc)

    def test_identical_states_zero(self):
        assert entanglement_bound(0.65, 1.0).E_max == 0.0

    def test_rejects_domain(self):
        for T, o in ((0.0, 0.5), (1.2, 0.5), (0.5, 0.0)):
            with pytest.raises(ValueError):
                entanglement_bound(T, o)

    def test_transmission_ordering(self):
        for o in (0.5, 0.65, 0.78):
            assert entanglement_bound(1.0, o).E_max >= entanglement_bound(0.457, o).E_max

    def test_grid_worker_invariance(self):
        args = ([1.0, 0.483], [0.5, 0.7, 0.9], 1e-2)
        a = bound_grid(*args, workers=1)
        b = bound_grid(*args, workers=4)
        assert [(c.transmission, c.overlap, c.E_max) for c in a] == [(c.transmission, c.overlap, c.E_max) for c in b]
        assert [(c.transmission, c.overlap) for c in a] == [(T, o) for T in args[0] for o in args[1]]
