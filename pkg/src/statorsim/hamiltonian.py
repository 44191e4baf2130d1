"""Target Hamiltonian, Gauss-law operators, reference evolution and initial states.

    H_E  = lambda_E  sum_links (1 - P - P^dagger)
    H_B  = lambda_B  sum_plaq  (Q1 Q2 Q3^dagger Q4^dagger + h.c.)
    H_M  = M         sum_x     (-1)^(x1+x2) n(x)
    H_GM = lambda_GM sum_(x,k) (psi^dagger(x) Q(x,k) psi(x+k) + h.c.)

Fermion mode ``i`` is the site with row-major index ``i``.  All operators act
as the identity on ancilla slots.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from . import algebra
from .errors import LayoutMismatch, TooLarge
from .krylov import expm_multiply_hermitian
from .lattice import LatticeGeometry, Plaquette, Site
from .state import (
    RegisterLayout,
    StateVector,
    basis_state,
    fermion_hop,
    link_slot,
    mode_slot,
    occupation,
    product_state,
)

TERMS = ("E", "B", "M", "GM")
DENSE_LIMIT = 2**14


@dataclass(frozen=True)
class CouplingSet:
    lambda_E: float = 1.0
    lambda_B: float = 1.0
    lambda_GM: float = 1.0
    mass: float = 1.0
    N: int = 2

    def __post_init__(self):
        algebra.delta(self.N)

    @property
    def delta(self) -> float:
        return 2 * np.pi / self.N


def register_layout(g: LatticeGeometry, N: int, ancilla_count: int = 1) -> RegisterLayout:
    return RegisterLayout(N, g.num_links, g.num_sites, ancilla_count)


def _check(s: StateVector, g: LatticeGeometry, N: int) -> None:
    L = s.layout
    if (L.N, L.num_links, L.num_modes) != (N, g.num_links, g.num_sites):
        raise LayoutMismatch(f"state layout {L} does not fit a {g.Lx}x{g.Ly} lattice with N={N}")


def _link_view(s_amp: np.ndarray, layout: RegisterLayout) -> np.ndarray:
    """Shape ``(ancillas..., link L-1, ..., link 0, 2**F)``."""
    return s_amp.reshape((layout.N,) * (layout.ancilla_count + layout.num_links) + (layout.fermion_dim,))


def _link_axis(layout: RegisterLayout, l: int) -> int:
    return layout.ancilla_count + layout.num_links - 1 - l


def _link_diag(layout: RegisterLayout, per_value: np.ndarray, l: int) -> np.ndarray:
    """Broadcastable array placing ``per_value[m]`` along link ``l``'s axis."""
    shape = [1] * (layout.ancilla_count + layout.num_links + 1)
    shape[_link_axis(layout, l)] = layout.N
    return per_value.reshape(shape)


def staggered_sign(s: Site) -> int:
    return -1 if s.parity else 1


def electric_diag(N: int) -> np.ndarray:
    """Eigenvalues of ``1 - P - P^dagger`` on ``|m>``."""
    return 1 - 2 * np.cos(2 * np.pi * np.arange(N) / N)


def _mass_diag(g: LatticeGeometry) -> np.ndarray:
    out = np.zeros(2**g.num_sites)
    for i, x in enumerate(g.sites):
        out += staggered_sign(x) * occupation(g.num_sites, i)
    return out


def apply_H(s: StateVector, g: LatticeGeometry, c: CouplingSet, terms: Iterable[str] = TERMS) -> StateVector:
    """Return ``H s`` for the selected terms, matrix-free."""
    _check(s, g, c.N)
    terms = set(terms)
    if not terms <= set(TERMS):
        raise ValueError(f"unknown terms {terms - set(TERMS)}")
    layout = s.layout
    psi = _link_view(s.amplitudes, layout)
    out = np.zeros_like(psi)
    F = layout.num_modes
    if "E" in terms and c.lambda_E:
        e = electric_diag(c.N)
        for l in range(layout.num_links):
            out += c.lambda_E * _link_diag(layout, e, l) * psi
    if "B" in terms and c.lambda_B:
        for p in g.plaquettes:
            axes = tuple(_link_axis(layout, g.link_index(l)) for l in g.plaquette_links(p))
            out += c.lambda_B * np.roll(psi, (1, 1, -1, -1), axis=axes)
            out += c.lambda_B * np.roll(psi, (-1, -1, 1, 1), axis=axes)
    if "M" in terms and c.mass:
        out += c.mass * _mass_diag(g) * psi
    if "GM" in terms and c.lambda_GM:
        for l in g.links:
            a = g.site_index(l.origin)
            b = g.site_index(g.head(l))
            ax = _link_axis(layout, g.link_index(l))
            out += c.lambda_GM * np.roll(fermion_hop(psi, a, b, F), 1, axis=ax)
            out += c.lambda_GM * np.roll(fermion_hop(psi, b, a, F), -1, axis=ax)
    return StateVector(layout, out.reshape(-1))


def expectation(s: StateVector, g: LatticeGeometry, c: CouplingSet, terms: Iterable[str] = TERMS) -> float:
    return float(np.real(np.vdot(s.amplitudes, apply_H(s, g, c, terms).amplitudes)) / s.norm() ** 2)


def plaquette_average(s: StateVector, g: LatticeGeometry, N: int) -> float:
    """Mean over plaquettes of ``<Re Q_plaq>``."""
    _check(s, g, N)
    psi = _link_view(s.amplitudes, s.layout)
    total = 0.0
    for p in g.plaquettes:
        axes = tuple(_link_axis(s.layout, g.link_index(l)) for l in g.plaquette_links(p))
        total += np.real(np.vdot(psi, np.roll(psi, (1, 1, -1, -1), axis=axes)))
    return float(total / g.num_plaquettes / s.norm() ** 2)


# -- dense oracle -----------------------------------------------------------


def _embed(layout: RegisterLayout, factors: dict[int, sp.spmatrix]) -> sp.csr_matrix:
    """Kronecker product over all tensor axes, identity where no factor is given."""
    dims = layout.shape
    out = sp.identity(1, dtype=complex, format="csr")
    for ax, d in enumerate(dims):
        out = sp.kron(out, factors.get(ax, sp.identity(d, dtype=complex)), format="csr")
    return out


def _annihilator(layout: RegisterLayout, i: int) -> sp.csr_matrix:
    A, L, F = layout.ancilla_count, layout.num_links, layout.num_modes
    lower = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
    z = sp.csr_matrix(algebra.SIGMA_Z)
    factors = {A + L + F - 1 - j: z for j in range(i)}
    factors[A + L + F - 1 - i] = lower
    return _embed(layout, factors)


def sparse_H(g: LatticeGeometry, c: CouplingSet, terms: Iterable[str] = TERMS, ancilla_count: int = 0) -> sp.csr_matrix:
    """Hamiltonian assembled from explicit Kronecker products and JW matrices."""
    terms = set(terms)
    layout = register_layout(g, c.N, ancilla_count)
    A = layout.ancilla_count
    lax = lambda l: A + g.num_links - 1 - g.link_index(l)
    P = sp.csr_matrix(algebra.clock_p(c.N))
    Q = sp.csr_matrix(algebra.shift_q(c.N))
    I_N = sp.identity(c.N, dtype=complex, format="csr")
    H = sp.csr_matrix((layout.dim, layout.dim), dtype=complex)
    if "E" in terms:
        for l in g.links:
            H = H + c.lambda_E * _embed(layout, {lax(l): I_N - P - P.conj().T})
    if "B" in terms:
        for p in g.plaquettes:
            l1, l2, l3, l4 = g.plaquette_links(p)
            Qp = _embed(layout, {lax(l1): Q, lax(l2): Q, lax(l3): Q.conj().T, lax(l4): Q.conj().T})
            H = H + c.lambda_B * (Qp + Qp.conj().T)
    cs = [_annihilator(layout, i) for i in range(g.num_sites)]
    if "M" in terms:
        for i, x in enumerate(g.sites):
            H = H + c.mass * staggered_sign(x) * (cs[i].conj().T @ cs[i])
    if "GM" in terms:
        for l in g.links:
            a, b = g.site_index(l.origin), g.site_index(g.head(l))
            hop = cs[a].conj().T @ _embed(layout, {lax(l): Q}) @ cs[b]
            H = H + c.lambda_GM * (hop + hop.conj().T)
    return H.tocsr()


def dense_H(g: LatticeGeometry, c: CouplingSet, terms: Iterable[str] = TERMS, ancilla_count: int = 0) -> np.ndarray:
    layout = register_layout(g, c.N, ancilla_count)
    if layout.dim > DENSE_LIMIT:
        raise TooLarge(f"dense Hamiltonian of dimension {layout.dim} exceeds {DENSE_LIMIT}")
    return sparse_H(g, c, terms, ancilla_count).toarray()


def local_plaquette_term(N: int) -> np.ndarray:
    """``Q1 Q2 Q3^dagger Q4^dagger + h.c.`` on four links (link 1 most significant)."""
    Q = algebra.shift_q(N)
    Qd = Q.conj().T
    Qp = np.kron(np.kron(Q, Q), np.kron(Qd, Qd))
    return Qp + Qp.conj().T


# -- charges and Gauss law -----------------------------------------------------


def static_charge(x: Site) -> int:
    return (1 - staggered_sign(x)) // 2


def charge(s: StateVector, g: LatticeGeometry, x: Site) -> float:
    """``<q(x)> = <n(x)> - (1 - (-1)^(x1+x2)) / 2``."""
    i = g.site_index(x)
    probs = np.sum(np.abs(s.fermion_view()) ** 2, axis=0) / s.norm() ** 2
    return float(probs @ occupation(g.num_sites, i) - static_charge(x))


def gauss_diagonal(layout: RegisterLayout, g: LatticeGeometry, x: Site) -> np.ndarray:
    """Diagonal of ``G(x) = P(x,1) P(x,2) P^dagger(x-1,1) P^dagger(x-2,2) exp(-i delta q(x))``."""
    N = layout.N
    d = 2 * np.pi / N
    phase = np.exp(1j * d * np.arange(N))
    at = g.links_at(x)
    G = np.ones((1,) * (layout.ancilla_count + layout.num_links + 1), dtype=complex)
    for role, l in at.items():
        ph = phase if role.startswith("out") else phase.conj()
        G = G * _link_diag(layout, ph, g.link_index(l))
    q = occupation(g.num_sites, g.site_index(x)) - static_charge(x)
    G = G * np.exp(-1j * d * q)
    return np.broadcast_to(G, _link_view(np.empty(layout.dim), layout).shape).reshape(-1)


def gauss_apply(s: StateVector, g: LatticeGeometry, x: Site) -> None:
    s.amplitudes *= gauss_diagonal(s.layout, g, x)


def gauss_residual(s: StateVector, g: LatticeGeometry) -> float:
    """``max_x ||(G(x) - 1) psi||``."""
    return max(
        float(np.linalg.norm((gauss_diagonal(s.layout, g, x) - 1) * s.amplitudes)) for x in g.sites
    )


def project_gauss_sector(s: StateVector, g: LatticeGeometry) -> StateVector:
    """Projection onto ``G(x) = 1`` for every site (not normalised)."""
    keep = np.ones(s.layout.dim, dtype=bool)
    for x in g.sites:
        keep &= np.abs(gauss_diagonal(s.layout, g, x) - 1) < 1e-9
    return StateVector(s.layout, np.where(keep, s.amplitudes, 0))


def fermion_number(s: StateVector) -> float:
    probs = np.sum(np.abs(s.fermion_view()) ** 2, axis=0) / s.norm() ** 2
    return float(probs @ np.bitwise_count(np.arange(s.layout.fermion_dim)))


def site_densities(s: StateVector, g: LatticeGeometry) -> np.ndarray:
    probs = np.sum(np.abs(s.fermion_view()) ** 2, axis=0) / s.norm() ** 2
    return np.array([probs @ occupation(g.num_sites, i) for i in range(g.num_sites)])


def dirac_sea(g: LatticeGeometry, N: int = 2, ancilla_count: int = 1) -> StateVector:
    """Odd sites filled, even sites empty, links in ``|0>``, ancillas uniform."""
    layout = register_layout(g, N, ancilla_count)
    phys = basis_state(layout.without_ancilla(), occupations=[x.parity for x in g.sites])
    return product_state(layout, phys.amplitudes)


# -- reference evolution --------------------------------------------------------


def conserved_labels(g: LatticeGeometry, N: int) -> np.ndarray:
    """Integer label per physical basis state: Gauss eigenphases and fermion number."""
    layout = register_layout(g, N, 0)
    label = np.bitwise_count(np.arange(layout.dim) % layout.fermion_dim).astype(np.int64)
    for x in g.sites:
        k = np.rint(np.angle(gauss_diagonal(layout, g, x)) / (2 * np.pi / N)).astype(np.int64) % N
        label = label * N + k
    return label


def _evolve_dense(s: StateVector, g: LatticeGeometry, c: CouplingSet, t: float) -> StateVector:
    H = sparse_H(g, c)
    labels = conserved_labels(g, c.N)
    coo = H.tocoo()
    off = labels[coo.row] != labels[coo.col]
    if off.any() and np.max(np.abs(coo.data[off])) > 1e-12:
        raise RuntimeError("Hamiltonian couples different Gauss/number sectors")
    amps = s.amplitudes.reshape(-1, s.layout.physical_dim).copy()
    active = np.any(amps != 0, axis=0)
    groups = defaultdict(list)
    for idx, lab in enumerate(labels):
        groups[lab].append(idx)
    for idx in groups.values():
        idx = np.array(idx)
        if not active[idx].any():
            continue
        block = H[idx][:, idx].toarray()
        w, v = np.linalg.eigh(block)
        U = (v * np.exp(-1j * t * w)) @ v.conj().T
        amps[:, idx] = amps[:, idx] @ U.T
    return StateVector(s.layout, amps.reshape(-1))


def exact_evolve(s: StateVector, g: LatticeGeometry, c: CouplingSet, t: float, method: str = "auto", tol: float = 1e-10) -> StateVector:
    """Return ``exp(-i H t) s`` (identity on ancillas).

    ``method="dense"`` diagonalises each conserved-label block of the
    explicitly assembled Hamiltonian; ``"krylov"`` is the matrix-free Lanczos
    path.  ``"auto"`` picks dense when the physical dimension is at most
    ``DENSE_LIMIT``.
    """
    _check(s, g, c.N)
    if method == "auto":
        method = "dense" if s.layout.physical_dim <= DENSE_LIMIT else "krylov"
    if method == "dense":
        if s.layout.physical_dim > DENSE_LIMIT:
            raise TooLarge(f"dense evolution limited to dimension {DENSE_LIMIT}")
        return _evolve_dense(s, g, c, t)
    if method == "krylov":
        if s.layout.dim > 2**25:
            raise TooLarge("Krylov evolution limited to dimension 2**25")
        matvec = lambda v: apply_H(StateVector(s.layout, v), g, c).amplitudes
        return StateVector(s.layout, expm_multiply_hermitian(matvec, s.amplitudes, t, tol=tol))
    raise ValueError(f"unknown method {method!r}")


def local_hopping_term(N: int, num_modes: int, a: int, b: int) -> np.ndarray:
    """``psi_a^dagger Q psi_b + h.c.`` on ``[link, mode F-1, ..., mode 0]`` from explicit JW matrices."""
    layout = RegisterLayout(N, 1, num_modes, 0)
    Q = _embed(layout, {0: sp.csr_matrix(algebra.shift_q(N))})
    hop = _annihilator(layout, a).conj().T @ Q @ _annihilator(layout, b)
    return (hop + hop.conj().T).toarray()


def link_targets(g: LatticeGeometry, link_index: int):
    """Slot list matching :func:`local_hopping_term`."""
    return [link_slot(link_index)] + [mode_slot(i) for i in reversed(range(g.num_sites))]
