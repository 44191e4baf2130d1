"""Register layout, gate application and Jordan-Wigner fermion operations."""

import itertools

import numpy as np
import pytest
import scipy.linalg

from statorsim import algebra
from statorsim.errors import DimMismatch, DuplicateTarget, NoAncilla, OutOfRange, SameMode, TooLarge
from statorsim.state import (
    MAX_DIM,
    RegisterLayout,
    StateVector,
    ancilla_return_check,
    ancilla_slot,
    apply_controlled_fermion_log,
    apply_fermionic_exponential,
    apply_number_phase,
    apply_qudit_gate,
    basis_state,
    fermion_hop,
    fidelity_up_to_phase,
    link_slot,
    load_snapshot,
    mode_slot,
    physical_part,
    product_state,
    random_state,
    save_snapshot,
)

from conftest import random_vector


def dense_gate_oracle(layout, targets, gate):
    """Full matrix of ``gate`` on ``targets`` built entry by entry from the digit expansion."""
    digits = np.array(np.unravel_index(np.arange(layout.dim), layout.shape)).T
    axes = [layout.axis(t) for t in targets]
    dims = [layout.shape[a] for a in axes]
    rest = [a for a in range(len(layout.shape)) if a not in axes]
    sub = np.ravel_multi_index(digits[:, axes].T, dims)
    same_rest = np.all(digits[:, None, rest] == digits[None, :, rest], axis=-1)
    return np.where(same_rest, gate[sub[:, None], sub[None, :]], 0)


def annihilators(F):
    """Explicit ``c_i`` on the occupation basis (bit i = mode i), sign from lower modes."""
    ops = []
    for i in range(F):
        c = np.zeros((2**F, 2**F))
        for f in range(2**F):
            if (f >> i) & 1:
                c[f ^ (1 << i), f] = (-1) ** bin(f & ((1 << i) - 1)).count("1")
        ops.append(c)
    return ops


class TestLayout:
    def test_dimension(self):
        L = RegisterLayout(3, 2, 4, 1)
        assert L.dim == 3**3 * 2**4
        assert L.physical_dim == 3**2 * 2**4

    def test_basis_state_all_zero(self):
        s = basis_state(RegisterLayout(2, 2, 2, 1))
        assert s.amplitudes[0] == 1 and s.norm() == 1.0

    def test_radix_order(self):
        L = RegisterLayout(2, 1, 1, 0)
        assert L.encode(link_values=[1], occupations=[0]) == 2
        assert L.encode(link_values=[0], occupations=[1]) == 1

    def test_ancilla_most_significant(self):
        L = RegisterLayout(3, 2, 1, 1)
        assert L.encode(ancilla=1) == L.physical_dim
        assert L.encode(link_values=[0, 1]) == 2 * 3

    def test_two_ancillas(self):
        L = RegisterLayout(2, 1, 1, 2)
        assert L.encode(ancilla=[1, 0]) == 4
        assert L.encode(ancilla=[0, 1]) == 8
        assert L.encode(ancilla=1) == 12

    def test_out_of_range(self):
        L = RegisterLayout(2, 1, 1, 1)
        with pytest.raises(OutOfRange):
            L.encode(link_values=[2])
        with pytest.raises(OutOfRange):
            L.encode(occupations=[3])
        with pytest.raises(OutOfRange):
            L.axis(link_slot(1))
        with pytest.raises(NoAncilla):
            RegisterLayout(2, 1, 1, 0).axis(ancilla_slot(0))

    def test_memory_guard(self):
        with pytest.raises(TooLarge):
            RegisterLayout(2, 20, 8, 0)
        assert RegisterLayout(2, 19, 8, 0).dim == MAX_DIM

    def test_product_state_norm_and_order(self, rng):
        L = RegisterLayout(3, 1, 1, 2)
        phys = random_vector(rng, L.physical_dim)
        a0, a1 = np.array([1, 0, 0]), np.array([0, 0, 1])
        s = product_state(L, phys, [a0, a1])
        np.testing.assert_allclose(s.amplitudes, np.kron(a1, np.kron(a0, phys)))
        np.testing.assert_allclose(physical_part(s, [a0, a1]), phys, atol=1e-15)


class TestQuditGate:
    def test_identity_bitwise(self, rng):
        s = random_state(RegisterLayout(3, 2, 2, 1), rng)
        before = s.amplitudes.copy()
        apply_qudit_gate(s, [link_slot(1), ancilla_slot(0)], np.eye(9))
        np.testing.assert_array_equal(s.amplitudes, before)

    def test_flip_link_digit(self):
        L = RegisterLayout(2, 3, 2, 1)
        s = basis_state(L, link_values=[0, 1, 0], occupations=[1, 0])
        apply_qudit_gate(s, [link_slot(2)], algebra.SIGMA_X)
        target = basis_state(L, link_values=[0, 1, 1], occupations=[1, 0])
        np.testing.assert_array_equal(s.amplitudes, target.amplitudes)

    @pytest.mark.parametrize(
        "layout, targets",
        [
            (RegisterLayout(2, 3, 2, 1), [link_slot(0), ancilla_slot(0)]),
            (RegisterLayout(2, 3, 2, 1), [mode_slot(1), link_slot(2)]),
            (RegisterLayout(3, 2, 1, 1), [ancilla_slot(0), link_slot(1)]),
            (RegisterLayout(3, 2, 1, 1), [mode_slot(0), link_slot(0), ancilla_slot(0)]),
            (RegisterLayout(2, 4, 2, 1), [link_slot(3), link_slot(0), mode_slot(1), ancilla_slot(0)]),
        ],
    )
    def test_against_dense_oracle(self, rng, layout, targets):
        d = int(np.prod([layout.slot_dim(t) for t in targets]))
        X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        gate = scipy.linalg.qr(X)[0]
        s = random_state(layout, rng)
        expected = dense_gate_oracle(layout, targets, gate) @ s.amplitudes
        apply_qudit_gate(s, targets, gate)
        assert np.max(np.abs(s.amplitudes - expected)) < 1e-13
        assert s.norm() == pytest.approx(1.0, abs=1e-12)

    def test_norm_preserved_large(self, rng):
        layout = RegisterLayout(2, 12, 8, 0)
        s = random_state(layout, rng)
        gate = scipy.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))[0]
        apply_qudit_gate(s, [link_slot(11), mode_slot(3), link_slot(0)], gate)
        assert abs(s.norm() - 1) < 1e-10

    def test_errors(self, rng):
        s = random_state(RegisterLayout(2, 2, 1, 1), rng)
        with pytest.raises(DimMismatch):
            apply_qudit_gate(s, [link_slot(0)], np.eye(3))
        with pytest.raises(DuplicateTarget):
            apply_qudit_gate(s, [link_slot(0), link_slot(0)], np.eye(4))


class TestFermions:
    def test_zero_angle_identity(self, rng):
        s = random_state(RegisterLayout(2, 1, 4, 1), rng)
        before = s.amplitudes.copy()
        apply_fermionic_exponential(s, 0, 3, 0.0)
        np.testing.assert_allclose(s.amplitudes, before, atol=0)

    def test_half_pi_adjacent(self):
        L = RegisterLayout(2, 0, 2, 0)
        s = basis_state(L, occupations=[1, 0])
        apply_fermionic_exponential(s, 0, 1, np.pi / 2)
        np.testing.assert_allclose(s.amplitudes, -1j * basis_state(L, occupations=[0, 1]).amplitudes, atol=1e-15)

    def test_two_mode_dense_oracle(self, rng):
        c0, c1 = annihilators(2)
        theta = 0.83
        U = scipy.linalg.expm(-1j * theta * (c0.T @ c1 + c1.T @ c0))
        s = StateVector(RegisterLayout(2, 0, 2, 0), random_vector(rng, 4))
        expected = U @ s.amplitudes
        apply_fermionic_exponential(s, 0, 1, theta)
        np.testing.assert_allclose(s.amplitudes, expected, atol=1e-14)

    def test_explicit_operators_anticommute(self):
        c = annihilators(4)
        for i, j in itertools.product(range(4), repeat=2):
            np.testing.assert_allclose(c[i] @ c[j].T + c[j].T @ c[i], np.eye(16) * (i == j), atol=0)
            np.testing.assert_allclose(c[i] @ c[j] + c[j] @ c[i], 0, atol=0)

    @pytest.mark.parametrize("i, j", [(0, 3), (3, 0), (1, 2), (2, 0), (0, 1)])
    def test_hop_matches_explicit_operators(self, rng, i, j):
        c = annihilators(4)
        v = random_vector(rng, 3 * 16).reshape(3, 16)
        out = fermion_hop(v, i, j, 4)
        np.testing.assert_allclose(out, v @ (c[i].T @ c[j]).T, atol=1e-15)

    @pytest.mark.parametrize("i, j", [(0, 3), (3, 1), (1, 2)])
    def test_exponential_matches_explicit_operators(self, rng, i, j):
        c = annihilators(4)
        theta = rng.uniform(-np.pi, np.pi)
        U = scipy.linalg.expm(-1j * theta * (c[i].T @ c[j] + c[j].T @ c[i]))
        layout = RegisterLayout(3, 1, 4, 0)
        s = random_state(layout, rng)
        expected = (s.amplitudes.reshape(3, 16) @ U.T).reshape(-1)
        apply_fermionic_exponential(s, i, j, theta)
        np.testing.assert_allclose(s.amplitudes, expected, atol=1e-14)

    def test_number_conserved(self, rng):
        layout = RegisterLayout(2, 1, 4, 1)
        s = random_state(layout, rng)
        occ = np.array([bin(f).count("1") for f in range(16)])
        n_before = np.sum(np.abs(s.fermion_view()) ** 2 * occ)
        apply_fermionic_exponential(s, 1, 3, rng.uniform(0, 2 * np.pi))
        assert np.sum(np.abs(s.fermion_view()) ** 2 * occ) == pytest.approx(n_before, abs=1e-13)
        assert s.norm() == pytest.approx(1.0, abs=1e-13)

    def test_disjoint_bilinears_commute(self, rng):
        s = random_state(RegisterLayout(2, 0, 4, 0), rng)
        a, b = s.copy(), s.copy()
        apply_fermionic_exponential(a, 0, 2, 0.4)
        apply_fermionic_exponential(a, 1, 3, 1.1)
        apply_fermionic_exponential(b, 1, 3, 1.1)
        apply_fermionic_exponential(b, 0, 2, 0.4)
        np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-14)

    def test_same_mode(self, rng):
        s = random_state(RegisterLayout(2, 0, 2, 0), rng)
        with pytest.raises(SameMode):
            apply_fermionic_exponential(s, 1, 1, 0.3)


class TestNumberPhaseAndControlledLog:
    def test_number_phase(self):
        L = RegisterLayout(2, 1, 2, 0)
        s = basis_state(L, link_values=[1], occupations=[0, 1])
        apply_number_phase(s, 1, np.pi)
        np.testing.assert_allclose(s.amplitudes, -basis_state(L, link_values=[1], occupations=[0, 1]).amplitudes)
        e = basis_state(L, occupations=[1, 0])
        apply_number_phase(e, 1, 0.7)
        np.testing.assert_array_equal(e.amplitudes, basis_state(L, occupations=[1, 0]).amplitudes)

    def test_controlled_log_unoccupied(self, rng):
        L = RegisterLayout(2, 0, 2, 1)
        s = product_state(L, basis_state(L.without_ancilla(), occupations=[0, 1]).amplitudes, [np.array([0.6, 0.8j])])
        before = s.amplitudes.copy()
        apply_controlled_fermion_log(s, 0, algebra.log_shift(2))
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-15)

    def test_controlled_log_occupied_flips_ancilla(self):
        L = RegisterLayout(2, 0, 1, 1)
        anc = np.array([0.6, 0.8j])
        s = product_state(L, np.array([0, 1]), [anc])
        apply_controlled_fermion_log(s, 0, algebra.log_shift(2))
        np.testing.assert_allclose(s.amplitudes, np.kron(algebra.SIGMA_X @ anc, [0, 1]), atol=1e-14)

    def test_controlled_log_unitary(self, rng):
        s = random_state(RegisterLayout(3, 1, 2, 1), rng)
        apply_controlled_fermion_log(s, 1, algebra.log_unitary(algebra.shift_q(3).conj().T))
        assert abs(s.norm() - 1) < 1e-12

    def test_controlled_log_needs_ancilla(self, rng):
        s = random_state(RegisterLayout(2, 1, 2, 0), rng)
        with pytest.raises(NoAncilla):
            apply_controlled_fermion_log(s, 0, algebra.log_shift(2))


class TestDiagnostics:
    def test_fidelity(self, rng):
        L = RegisterLayout(2, 2, 2, 1)
        a = random_state(L, rng)
        b = StateVector(L, np.exp(0.37j) * a.amplitudes)
        assert fidelity_up_to_phase(a, a) == pytest.approx(1.0)
        assert fidelity_up_to_phase(a, b) == pytest.approx(1.0)
        assert fidelity_up_to_phase(basis_state(L), basis_state(L, ancilla=1)) == 0.0
        with pytest.raises(DimMismatch):
            fidelity_up_to_phase(a, random_state(RegisterLayout(2, 1, 2, 1), rng))

    def test_ancilla_return(self, rng):
        L = RegisterLayout(2, 2, 2, 1)
        phys = random_vector(rng, L.physical_dim)
        assert ancilla_return_check(product_state(L, phys)) == pytest.approx(0.0, abs=1e-15)
        assert ancilla_return_check(product_state(L, phys, [np.array([1, 0])])) == pytest.approx(0.5)

    def test_ancilla_return_needs_ancilla(self, rng):
        with pytest.raises(NoAncilla):
            ancilla_return_check(random_state(RegisterLayout(2, 2, 2, 0), rng))

    def test_snapshot_round_trip(self, rng, tmp_path):
        s = random_state(RegisterLayout(3, 2, 3, 1), rng)
        path = tmp_path / "state.bin"
        save_snapshot(s, path)
        raw = path.read_bytes()
        assert raw[:4] == b"Z2SV" and len(raw) == 32 + 16 * s.layout.dim
        back = load_snapshot(path)
        assert back.layout == s.layout
        np.testing.assert_array_equal(back.amplitudes, s.amplitudes)
