"""Stator entanglers, ancilla rotation and the two composite routines."""

import numpy as np
import pytest
import scipy.linalg

from statorsim import algebra, stator
from statorsim import hamiltonian as ham
from statorsim.errors import AncillaNotReady, NoAncilla
from statorsim.hamiltonian import CouplingSet
from statorsim.lattice import EVEN, ODD, Link, Site, enumerate_plaquettes_by_parity
from statorsim.state import (
    RegisterLayout,
    StateVector,
    ancilla_return_check,
    ancilla_slot,
    apply_qudit_gate,
    basis_state,
    fidelity_up_to_phase,
    link_slot,
    physical_part,
    product_state,
    random_state,
)
from statorsim.verify import gauge_matter_oracle_defect, plaquette_oracle_defects, random_gauss_state

from conftest import random_vector


def plaquette_dense(N):
    Q = algebra.shift_q(N)
    Qd = Q.conj().T
    return np.kron(np.kron(Q, Q), np.kron(Qd, Qd))


# links 1..4 of the plaquette sit at register indices 3..0 so link 1 is the
# most significant factor, matching the Kronecker order above
PLAQ = [3, 2, 1, 0]


class TestLinkEntangler:
    def test_ancilla_zero_leaves_link(self, rng):
        L = RegisterLayout(3, 2, 1, 1)
        phys = random_vector(rng, L.physical_dim)
        s = product_state(L, phys, [np.eye(3)[0]])
        stator.entangle_link(s, 1)
        np.testing.assert_allclose(s.amplitudes, product_state(L, phys, [np.eye(3)[0]]).amplitudes, atol=0)

    def test_ancilla_one_flips_link_n2(self):
        L = RegisterLayout(2, 2, 0, 1)
        s = basis_state(L, ancilla=1, link_values=[0, 1])
        stator.entangle_link(s, 0)
        np.testing.assert_array_equal(s.amplitudes, basis_state(L, ancilla=1, link_values=[1, 1]).amplitudes)

    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_dagger_inverts(self, rng, N):
        s = random_state(RegisterLayout(N, 2, 1, 1), rng)
        before = s.amplitudes.copy()
        stator.entangle_link(s, 1)
        stator.entangle_link(s, 1, dagger=True)
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-15)

    def test_needs_ancilla(self, rng):
        with pytest.raises(NoAncilla):
            stator.entangle_link(random_state(RegisterLayout(2, 1, 1, 0), rng), 0)


class TestEigenoperator:
    @pytest.mark.parametrize("N", [2, 3])
    def test_link_relation(self, rng, N):
        L = RegisterLayout(N, 2, 2, 1)
        Q = algebra.shift_q(N)
        for _ in range(20):
            phys = random_vector(rng, L.physical_dim)
            lhs = product_state(L, phys)
            stator.entangle_link(lhs, 1)
            apply_qudit_gate(lhs, [ancilla_slot(0)], Q)
            rhs = product_state(L, phys)
            apply_qudit_gate(rhs, [link_slot(1)], Q.conj().T)
            stator.entangle_link(rhs, 1)
            assert np.linalg.norm(lhs.amplitudes - rhs.amplitudes) < 1e-13

    def test_full_register_n2(self, g22, rng):
        assert stator.check_eigenoperator(stator.StatorContext(g22, 2), 100, rng) < 1e-12

    def test_full_register_n3(self, g22, rng):
        assert stator.check_eigenoperator(stator.StatorContext(g22, 3), 10, rng) < 1e-12

    @pytest.mark.parametrize("N", [2, 3, 5])
    def test_local_register(self, rng, N):
        assert stator.check_eigenoperator_local(N, 100, rng) < 1e-12

    @pytest.mark.parametrize("N", [2, 3])
    def test_wrong_ancilla_state_fails(self, g22, rng, N):
        bad = np.eye(N)[0]
        assert stator.check_eigenoperator_local(N, 5, rng, ancilla_state=bad) > 0.1
        assert stator.check_eigenoperator(stator.StatorContext(g22, N), 2, rng, ancilla_state=bad) > 0.1

    def test_wrong_sign_convention_fails(self, rng):
        """``Qt S = S Q`` (rather than ``S Q^dagger``) is violated for N = 3."""
        L = RegisterLayout(3, 1, 0, 1)
        Q = algebra.shift_q(3)
        phys = random_vector(rng, 3)
        lhs = product_state(L, phys)
        stator.entangle_link(lhs, 0)
        apply_qudit_gate(lhs, [ancilla_slot(0)], Q)
        rhs = product_state(L, phys)
        apply_qudit_gate(rhs, [link_slot(0)], Q)
        stator.entangle_link(rhs, 0)
        assert np.linalg.norm(lhs.amplitudes - rhs.amplitudes) > 0.1


class TestPlaquetteEntangler:
    @pytest.mark.parametrize("N", [2, 3])
    def test_stator_matches_dense_sum(self, rng, N):
        L = RegisterLayout(N, 4, 0, 1)
        phys = random_vector(rng, L.physical_dim)
        s = product_state(L, phys)
        stator.entangle_plaquette(s, PLAQ)
        Qp = plaquette_dense(N)
        expected = sum(np.kron(np.eye(N)[m], np.linalg.matrix_power(Qp, m) @ phys) for m in range(N)) / np.sqrt(N)
        np.testing.assert_allclose(s.amplitudes, expected, atol=1e-14)

    @pytest.mark.parametrize("N", [2, 3])
    def test_eigenoperator(self, rng, N):
        L = RegisterLayout(N, 4, 0, 1)
        Qp = plaquette_dense(N)
        phys = random_vector(rng, L.physical_dim)
        lhs = product_state(L, phys)
        stator.entangle_plaquette(lhs, PLAQ)
        apply_qudit_gate(lhs, [ancilla_slot(0)], algebra.shift_q(N))
        rhs = product_state(L, Qp.conj().T @ phys)
        stator.entangle_plaquette(rhs, PLAQ)
        assert np.linalg.norm(lhs.amplitudes - rhs.amplitudes) < 1e-13

    def test_adjoint_inverts(self, rng):
        s = random_state(RegisterLayout(3, 5, 1, 1), rng)
        before = s.amplitudes.copy()
        stator.entangle_plaquette(s, [4, 0, 2, 1])
        stator.entangle_plaquette(s, [4, 0, 2, 1], dagger=True)
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-14)


class TestVB:
    def test_zero_time(self):
        np.testing.assert_allclose(stator.vb_gate(3, 1.0, 0.0), np.eye(3), atol=1e-15)

    def test_n2_form(self):
        np.testing.assert_allclose(
            stator.vb_gate(2, 0.7, 0.3), scipy.linalg.expm(-2j * 0.7 * 0.3 * algebra.SIGMA_X), atol=1e-14
        )

    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_diagonal_in_fourier_basis(self, N):
        m = np.arange(N)
        F = np.exp(-2j * np.pi * np.outer(m, m) / N) / np.sqrt(N)
        D = F.conj().T @ stator.vb_gate(N, 0.9, 0.4) @ F
        np.testing.assert_allclose(D - np.diag(np.diag(D)), 0, atol=1e-13)


class TestPlaquetteRoutine:
    @pytest.mark.parametrize("N", [2, 3])
    def test_single_plaquette_layout(self, rng, N):
        L = RegisterLayout(N, 4, 0, 1)
        lam, tau = 0.8, 0.35
        U = scipy.linalg.expm(-1j * lam * tau * (plaquette_dense(N) + plaquette_dense(N).conj().T))
        phys = random_vector(rng, L.physical_dim)
        s = product_state(L, phys)
        stator.plaquette_interaction(s, PLAQ, lam, tau)
        assert ancilla_return_check(s) < 1e-12
        np.testing.assert_allclose(physical_part(s), U @ phys, atol=1e-13)

    @pytest.mark.parametrize("N", [2, 3])
    def test_torus_against_oracle(self, g22, rng, N):
        f, a = plaquette_oracle_defects(g22, CouplingSet(lambda_B=1.2, N=N), 0.3, rng)
        assert f < 1e-12 and a < 1e-12

    def test_zero_coupling_identity(self, g22, rng):
        s = random_gauss_state(g22, 2, rng)
        before = s.amplitudes.copy()
        stator.plaquette_routine(s, g22, g22.plaquettes[1], 0.0, 0.5)
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-14)

    def test_not_ready(self, g22):
        layout = ham.register_layout(g22, 2)
        s = basis_state(layout)
        with pytest.raises(AncillaNotReady):
            stator.plaquette_routine(s, g22, g22.plaquettes[0], 1.0, 0.1)

    def test_same_parity_commute(self, g22, rng):
        s = random_gauss_state(g22, 3, rng)
        p, q = enumerate_plaquettes_by_parity(g22, EVEN)
        a, b = s.copy(), s.copy()
        stator.plaquette_routine(a, g22, p, 0.9, 0.2)
        stator.plaquette_routine(a, g22, q, 0.9, 0.2)
        stator.plaquette_routine(b, g22, q, 0.9, 0.2)
        stator.plaquette_routine(b, g22, p, 0.9, 0.2)
        assert np.linalg.norm(a.amplitudes - b.amplitudes) < 1e-12


class TestGaugeMatterRoutine:
    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_one_link_two_sites(self, rng, N):
        L = RegisterLayout(N, 1, 2, 1)
        lam, tau = 1.1, 0.4
        U = scipy.linalg.expm(-1j * lam * tau * ham.local_hopping_term(N, 2, 0, 1))
        phys = random_vector(rng, L.physical_dim)
        s = product_state(L, phys)
        stator.link_interaction(s, 0, 0, 1, lam, tau)
        assert ancilla_return_check(s) < 1e-12
        ref = StateVector(L, product_state(L, U @ phys).amplitudes)
        assert 1 - fidelity_up_to_phase(s, ref) < 1e-11
        # the abstract sandwich has no stray phases, so the match is exact
        np.testing.assert_allclose(physical_part(s), U @ phys, atol=1e-13)

    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_abstract_sandwich_phases_vanish(self, N):
        ph = stator.measure_sandwich_phases(N)
        assert abs(ph.before) < 1e-12 and abs(ph.after) < 1e-12

    @pytest.mark.parametrize("N", [2, 3])
    def test_every_link_of_torus(self, g22, rng, N):
        """Vertical links on 2x2 hop across one intermediate mode, exercising the string."""
        assert gauge_matter_oracle_defect(g22, CouplingSet(lambda_GM=0.7, N=N), 0.45, rng) < 1e-11

    def test_zero_time_identity(self, g22, rng):
        s = random_gauss_state(g22, 2, rng)
        before = s.amplitudes.copy()
        stator.gauge_matter_routine(s, g22, Link(Site(1, 0), 2), 1.0, 0.0)
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-14)

    @pytest.mark.parametrize("N", [2, 3])
    def test_routines_commute_with_gauss(self, g22, rng, N):
        s = random_state(ham.register_layout(g22, N), rng)
        s = product_state(s.layout, physical_part(s) / np.linalg.norm(physical_part(s)))
        routines = [
            lambda v: stator.gauge_matter_routine(v, g22, Link(Site(0, 1), 2), 0.8, 0.3),
            lambda v: stator.plaquette_routine(v, g22, g22.plaquettes[2], 0.8, 0.3),
        ]
        for routine in routines:
            for x in g22.sites:
                a, b = s.copy(), s.copy()
                ham.gauss_apply(a, g22, x)
                routine(a)
                routine(b)
                ham.gauss_apply(b, g22, x)
                assert np.linalg.norm(a.amplitudes - b.amplitudes) < 1e-11

    def test_gauss_sector_preserved(self, g22, rng):
        s = random_gauss_state(g22, 3, rng)
        for link in g22.links:
            stator.gauge_matter_routine(s, g22, link, 0.6, 0.7)
        assert ham.gauss_residual(s, g22) < 1e-12
        assert ancilla_return_check(s) < 1e-12


class TestParallelAncillas:
    """One ancilla per same-parity plaquette (or link) at once versus one reused ancilla."""

    @pytest.mark.parametrize("N", [2, 3])
    def test_even_plaquette_round(self, g22, rng, N):
        lam, tau = 0.9, 0.37
        seq = random_gauss_state(g22, N, rng)
        phys = physical_part(seq)
        par = product_state(ham.register_layout(g22, N, 2), phys)
        plaqs = enumerate_plaquettes_by_parity(g22, EVEN)
        links = [[g22.link_index(l) for l in g22.plaquette_links(p)] for p in plaqs]
        for j, ls in enumerate(links):
            stator.entangle_plaquette(par, ls, ancilla=j)
        for j in range(2):
            stator.apply_VB(par, lam, tau, ancilla=j)
        for j, ls in enumerate(links):
            stator.entangle_plaquette(par, ls, dagger=True, ancilla=j)
        for p in plaqs:
            stator.plaquette_routine(seq, g22, p, lam, tau)
        assert max(ancilla_return_check(par, j) for j in range(2)) < 1e-12
        ref = product_state(par.layout, physical_part(seq))
        assert 1 - fidelity_up_to_phase(par, ref) < 1e-12

    def test_even_vertical_link_round(self, g22, rng):
        lam, tau = 0.8, 0.5
        seq = random_gauss_state(g22, 2, rng)
        par = product_state(ham.register_layout(g22, 2, 2), physical_part(seq))
        links = g22.links_of_class("ev")
        ends = [(g22.site_index(l.origin), g22.site_index(g22.head(l))) for l in links]
        for j, l in enumerate(links):
            stator.entangle_link(par, g22.link_index(l), ancilla=j)
        for j, (psi, chi) in enumerate(ends):
            stator._abstract_sandwich(par, psi, chi, lam * tau, j)
        for j, l in enumerate(links):
            stator.entangle_link(par, g22.link_index(l), dagger=True, ancilla=j)
        for l in links:
            stator.gauge_matter_routine(seq, g22, l, lam, tau)
        ref = product_state(par.layout, physical_part(seq))
        assert 1 - fidelity_up_to_phase(par, ref) < 1e-12
