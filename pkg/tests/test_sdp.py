import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqkd import sdp
from cvqkd.witness import EvmProblem, min_eigenvalues, problem_from_excess, sdp_feasibility_margin


def random_hermitian(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (A + A.conj().T) / 2


def psd_block(rng, n=3):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    B = A @ A.conj().T / n
    return B / np.trace(B).real


def fixed_instance(seed):
    rng = np.random.default_rng(seed)
    B0, B1 = psd_block(rng), psd_block(rng)
    D = 0.3 * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    c = complex(0.5 * rng.uniform(-1, 1))
    D[0, 0] = c
    return EvmProblem(B0, B1, c, fixed_completion=D), D


class TestFixedCompletion:
    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("method", ["interior-point", "cvxopt"])
    def test_matches_min_eigenvalue(self, seed, method):
        p, D = fixed_instance(seed)
        chi = np.block([[p.B0, D], [D.conj().T, p.B1]])
        pt = np.block([[p.B0, D.conj().T], [D, p.B1]])
        expected = min(np.linalg.eigvalsh(chi)[0], np.linalg.eigvalsh(pt)[0])
        v = sdp_feasibility_margin(p, method=method)
        assert v.status == "optimal"
        assert v.t_star == pytest.approx(expected, abs=1e-8)
        assert min(min_eigenvalues(p, D)) == pytest.approx(expected, abs=1e-12)


class TestAnalyticOptimum:
    def test_two_by_two_offdiagonal(self):
        # max over z of min eig [[a, z], [z, b]] is min(a, b), attained at z = 0
        C = np.array([np.diag([0.7, 0.2])], dtype=complex)
        G = np.array([[[[0, 1], [1, 0]]]], dtype=complex)
        for method in ("interior-point", "cvxopt"):
            r = sdp.solve(C, G, method=method)
            assert r.converged
            assert r.t == pytest.approx(0.2, abs=1e-8)
            assert abs(r.z[0]) < 1e-4

    def test_shared_variable_across_blocks(self):
        C = np.array([np.diag([1.0, 1.0]), np.diag([2.0, 5.0])], dtype=complex)
        G = np.array([[np.diag([1.0, -1.0]), np.diag([-3.0, 0.0])]], dtype=complex)
        r = sdp.solve(C, G, method="interior-point")
        # min(1 + z, 1 - z, 2 - 3z, 5) is maximal at z = 0 with value 1
        assert r.t == pytest.approx(1.0, abs=1e-8)

    def test_complex_generator(self):
        # [[1, i z], [-i z, 1]] has eigenvalues 1 +- z
        C = np.array([np.eye(2)], dtype=complex)
        G = np.array([[[[0, 1j], [-1j, 0]]]])
        r = sdp.solve(C, G, method="interior-point")
        assert r.t == pytest.approx(1.0, abs=1e-8)


class TestCertificates:
    def test_gap_brackets_optimum(self):
        p, D = fixed_instance(3)
        free = EvmProblem(p.B0, p.B1, p.c)
        v = sdp_feasibility_margin(free, method="interior-point")
        assert v.status == "optimal"
        assert 0 <= v.gap <= 1e-8
        # the reported t is attained by the reported completion
        assert min(min_eigenvalues(free, v.completion)) == pytest.approx(v.t_star, abs=1e-12)
        # and the fixed completion can only do worse
        assert min(min_eigenvalues(free, D)) <= v.t_star + 1e-12

    def test_upper_bound_from_any_dual_point(self):
        rng = np.random.default_rng(11)
        C = np.array([random_hermitian(rng, 3), random_hermitian(rng, 3)])
        G = np.zeros((0, 2, 3, 3), dtype=complex)
        Z = np.array([np.eye(3), np.zeros((3, 3))], dtype=complex) / 3
        # no free variables: any feasible dual point bounds the min eigenvalue from above
        ub = sdp.certified_upper_bound(C, G, Z)
        assert ub >= sdp.min_eig_objective(C, G, np.zeros(0)) - 1e-12

    def test_real_embedding_spectrum(self):
        rng = np.random.default_rng(12)
        H = random_hermitian(rng, 4)
        w = np.linalg.eigvalsh(H)
        we = np.linalg.eigvalsh(sdp.real_embedding(H))
        assert np.allclose(np.sort(np.repeat(w, 2)), we, atol=1e-12)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            sdp.solve(np.eye(2)[None], np.zeros((0, 1, 2, 2)), method="simplex")


@st.composite
def witness_instances(draw):
    T = draw(st.sampled_from([1.0, 0.65, 0.483, 0.457]))
    o = draw(st.floats(0.3, 0.95))
    E = draw(st.floats(0.0, 1.0))
    return T, o, E


class TestRouteAgreement:
    @given(witness_instances())
    @settings(max_examples=25, deadline=None)
    def test_interior_point_matches_cvxopt(self, inst):
        p = problem_from_excess(*inst)
        a = sdp_feasibility_margin(p, method="interior-point")
        b = sdp_feasibility_margin(p, method="cvxopt")
        assert a.status == "optimal" and b.status == "optimal"
        assert a.t_star == pytest.approx(b.t_star, abs=1e-6)

    def test_auto_falls_back(self, monkeypatch):
        p, _ = fixed_instance(0)
        calls = []
        real = sdp.solve_cvxopt

        def failing(C, G, **kw):
            return sdp.SdpResult(0.0, np.zeros(G.shape[0]), "iteration limit", 100, np.inf, np.inf, "interior-point")

        def counting(C, G, **kw):
            calls.append(1)
            return real(C, G, **kw)

        monkeypatch.setattr(sdp, "solve_interior_point", failing)
        monkeypatch.setattr(sdp, "solve_cvxopt", counting)
        v = sdp_feasibility_margin(p)
        assert calls and v.method == "cvxopt" and v.status == "optimal"
