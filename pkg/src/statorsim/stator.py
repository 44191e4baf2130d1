"""Ancilla-mediated entanglers and the two stator routines.

A link entangler ``U_i = sum_m Q_i^m (x) |m><m|_anc`` applied to an ancilla in
the uniform state creates a stator ``S_i`` with ``Qt S_i = S_i Q_i^dagger``.
Conjugating an ancilla-local unitary by such entanglers yields a many-body
unitary on the links while the ancilla returns to its initial state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import algebra
from .errors import AncillaNotReady, NoAncilla
from .lattice import LatticeGeometry, Link, Plaquette
from .state import (
    RegisterLayout,
    StateVector,
    ancilla_return_check,
    ancilla_slot,
    apply_controlled_fermion_log,
    apply_fermionic_exponential,
    apply_number_phase,
    apply_qudit_gate,
    basis_state,
    link_slot,
    mode_slot,
    product_state,
)

READY_TOL = 1e-10


def _require_ancilla(s: StateVector, ancilla: int) -> None:
    if s.layout.ancilla_count <= ancilla:
        raise NoAncilla(f"routine needs ancilla {ancilla}, layout has {s.layout.ancilla_count}")


def _require_ready(s: StateVector, ancilla: int) -> None:
    _require_ancilla(s, ancilla)
    defect = ancilla_return_check(s, ancilla)
    if defect > READY_TOL:
        raise AncillaNotReady(f"ancilla {ancilla} return defect {defect:.3e} > {READY_TOL}", defect)


def link_entangler_gate(N: int, dagger: bool = False) -> np.ndarray:
    """Gate on ``[ancilla, link]``: ancilla value ``m`` applies ``Q^m`` (or ``Q^-m``)."""
    Q = algebra.shift_q(N)
    return algebra.controlled_power(N, Q.conj().T if dagger else Q)


def entangle_link(s: StateVector, link_index: int, dagger: bool = False, ancilla: int = 0) -> None:
    _require_ancilla(s, ancilla)
    gate = link_entangler_gate(s.layout.N, dagger)
    apply_qudit_gate(s, [ancilla_slot(ancilla), link_slot(link_index)], gate)


def entangle_plaquette(s: StateVector, link_indices, dagger: bool = False, ancilla: int = 0) -> None:
    """``U_1 U_2 U_3^dagger U_4^dagger`` (rightmost applied first), or its adjoint."""
    order = list(zip(link_indices, [False, False, True, True]))
    if dagger:
        for l, d in order:
            entangle_link(s, l, not d, ancilla)
    else:
        for l, d in reversed(order):
            entangle_link(s, l, d, ancilla)


def apply_link_entangler(s: StateVector, g: LatticeGeometry, link: Link, dagger: bool = False, ancilla: int = 0) -> None:
    entangle_link(s, g.link_index(link), dagger, ancilla)


def apply_plaquette_entangler(s: StateVector, g: LatticeGeometry, p: Plaquette, dagger: bool = False, ancilla: int = 0) -> None:
    entangle_plaquette(s, [g.link_index(l) for l in g.plaquette_links(p)], dagger, ancilla)


def vb_gate(N: int, lambda_B: float, tau: float) -> np.ndarray:
    Q = algebra.shift_q(N)
    return scipy.linalg.expm(-1j * lambda_B * tau * (Q + Q.conj().T))


def apply_VB(s: StateVector, lambda_B: float, tau: float, ancilla: int = 0) -> None:
    """``exp(-i lambda_B tau (Qt + Qt^dagger))`` on the ancilla."""
    _require_ancilla(s, ancilla)
    apply_qudit_gate(s, [ancilla_slot(ancilla)], vb_gate(s.layout.N, lambda_B, tau))


def plaquette_interaction(s: StateVector, link_indices, lambda_B: float, tau: float, ancilla: int = 0, entangler=None) -> None:
    """Plaquette stator, ancilla rotation, stator removed.

    ``entangler(s, link_indices, dagger, ancilla)`` defaults to the ideal
    plaquette entangler.
    """
    _require_ready(s, ancilla)
    entangler = entangler or entangle_plaquette
    entangler(s, link_indices, False, ancilla)
    apply_VB(s, lambda_B, tau, ancilla)
    entangler(s, link_indices, True, ancilla)


def plaquette_routine(s: StateVector, g: LatticeGeometry, p: Plaquette, lambda_B: float, tau: float, ancilla: int = 0, **kw) -> None:
    """Net effect ``exp(-i lambda_B tau (Q_plaq + Q_plaq^dagger))`` on the physical register."""
    plaquette_interaction(s, [g.link_index(l) for l in g.plaquette_links(p)], lambda_B, tau, ancilla, **kw)


# -- gauge-matter routine ----------------------------------------------------------


@dataclass(frozen=True)
class NumberPhases:
    """Stray phases ``exp(-i before n_psi)`` and ``exp(-i after n_psi)`` around a matter sandwich."""

    before: float = 0.0
    after: float = 0.0


def matter_entangler_generator(N: int) -> np.ndarray:
    """``log(Qt^dagger)``; ``exp(n (x) log(Qt^dagger))`` is the matter-side entangler."""
    return algebra.log_unitary(algebra.shift_q(N).conj().T)


def _abstract_sandwich(s: StateVector, psi: int, chi: int, theta: float, ancilla: int) -> None:
    A = matter_entangler_generator(s.layout.N)
    apply_controlled_fermion_log(s, psi, -A, ancilla)
    apply_fermionic_exponential(s, psi, chi, theta)
    apply_controlled_fermion_log(s, psi, A, ancilla)


def measure_sandwich_phases(N: int, sandwich=None) -> NumberPhases:
    """Probe a matter sandwich on a 2-mode + ancilla register and fit its number phases.

    ``sandwich(s, psi, chi, theta, ancilla)`` defaults to the abstract one.  At
    ``theta = 0`` the ideal sandwich is the identity, so occupied-psi basis
    states reveal ``before + after``; a ``theta = pi/2`` probe, which moves
    the fermion between the two phase kicks, separates them.
    """
    sandwich = sandwich or _abstract_sandwich
    layout = RegisterLayout(N, 0, 2, 1)

    def probe(occ, theta):
        s = product_state(layout, basis_state(layout.without_ancilla(), occupations=occ).amplitudes)
        sandwich(s, 0, 1, theta, 0)
        return s

    def amp(s, occ):
        ref = product_state(layout, basis_state(layout.without_ancilla(), occupations=occ).amplitudes)
        return np.vdot(ref.amplitudes, s.amplitudes)

    total = -np.angle(amp(probe([1, 0], 0.0), [1, 0]) / amp(probe([0, 0], 0.0), [0, 0]))
    # chi -> psi hop at theta=pi/2: amplitude -i exp(-i after) for the ideal rotation
    hop = amp(probe([0, 1], np.pi / 2), [1, 0]) / amp(probe([0, 0], 0.0), [0, 0])
    after = -np.angle(hop / -1j)
    return NumberPhases(before=float(np.angle(np.exp(1j * (total - after)))), after=float(after))


def link_interaction(
    s: StateVector,
    link_index: int,
    psi: int,
    chi: int,
    lambda_GM: float,
    tau: float,
    ancilla: int = 0,
    compensate: bool = True,
    sandwich=None,
    phases: NumberPhases | None = None,
    entangler=None,
) -> None:
    """Stator on the link, matter sandwich, stator removed.

    ``sandwich`` and ``entangler(s, link_index, dagger, ancilla)`` default to
    the ideal unitaries; the atomic layer substitutes its pulse compilations.
    With ``compensate`` the stray number phases of the sandwich (measured
    when not given) are undone by explicit occupation phases on ``psi``.
    """
    _require_ready(s, ancilla)
    sandwich = sandwich or _abstract_sandwich
    entangler = entangler or entangle_link
    if compensate and phases is None:
        phases = measure_sandwich_phases(s.layout.N, sandwich)
    entangler(s, link_index, False, ancilla)
    if compensate:
        apply_number_phase(s, psi, -phases.before)
    sandwich(s, psi, chi, lambda_GM * tau, ancilla)
    if compensate:
        apply_number_phase(s, psi, -phases.after)
    entangler(s, link_index, True, ancilla)


def gauge_matter_routine(
    s: StateVector,
    g: LatticeGeometry,
    link: Link,
    lambda_GM: float,
    tau: float,
    ancilla: int = 0,
    compensate: bool = True,
    **kw,
) -> None:
    """Net effect ``exp(-i lambda_GM tau (psi^dagger Q chi + h.c.))`` on the link.

    ``psi`` sits at the link origin, ``chi`` at its head.
    """
    psi, chi = g.site_index(link.origin), g.site_index(g.head(link))
    link_interaction(s, g.link_index(link), psi, chi, lambda_GM, tau, ancilla, compensate, **kw)


# -- eigenoperator verification ----------------------------------------------------------


@dataclass(frozen=True)
class StatorContext:
    geometry: LatticeGeometry
    N: int

    @property
    def layout(self) -> RegisterLayout:
        return RegisterLayout(self.N, self.geometry.num_links, self.geometry.num_sites, 1)


def _apply_links_power(s: StateVector, g: LatticeGeometry, links, powers) -> None:
    Q = algebra.shift_q(s.layout.N)
    for l, k in zip(links, powers):
        apply_qudit_gate(s, [link_slot(g.link_index(l))], np.linalg.matrix_power(Q, k % s.layout.N))


def check_eigenoperator(ctx: StatorContext, trials: int, rng: np.random.Generator, ancilla_state=None) -> float:
    """Max residual of ``Qt S = S Q^dagger`` over random states, links and plaquettes.

    Passing an ancilla state other than the uniform one gives a negative
    control.
    """
    g, N = ctx.geometry, ctx.N
    layout = ctx.layout
    anc = algebra.ancilla_in_state(N) if ancilla_state is None else np.asarray(ancilla_state, dtype=complex)
    Qt = algebra.shift_q(N)
    worst = 0.0
    for _ in range(trials):
        v = rng.normal(size=layout.physical_dim) + 1j * rng.normal(size=layout.physical_dim)
        v /= np.linalg.norm(v)
        link = g.links[rng.integers(len(g.links))]
        plaq = g.plaquettes[rng.integers(len(g.plaquettes))]
        cases = [
            (lambda s: apply_link_entangler(s, g, link), [link], [-1]),
            (lambda s: apply_plaquette_entangler(s, g, plaq), g.plaquette_links(plaq), [-1, -1, 1, 1]),
        ]
        for entangle, links, powers in cases:
            lhs = product_state(layout, v, [anc])
            entangle(lhs)
            apply_qudit_gate(lhs, [ancilla_slot(0)], Qt)
            rhs = product_state(layout, v, [anc])
            _apply_links_power(rhs, g, links, powers)
            entangle(rhs)
            worst = max(worst, float(np.linalg.norm(lhs.amplitudes - rhs.amplitudes)))
    return worst


def check_eigenoperator_local(N: int, trials: int, rng: np.random.Generator, ancilla_state=None) -> float:
    """Same relation as :func:`check_eigenoperator` on a stator's support only.

    The register holds just the entangled links plus the ancilla.  Every
    entangler acts as the identity elsewhere and is the same gate for every
    link (or plaquette) of any lattice, so this residual bounds the full
    register one at a cost independent of lattice size.
    """
    anc = algebra.ancilla_in_state(N) if ancilla_state is None else np.asarray(ancilla_state, dtype=complex)
    Qt = algebra.shift_q(N)
    Qd = Qt.conj().T
    cases = [
        (1, lambda s: entangle_link(s, 0), [Qd]),
        (4, lambda s: entangle_plaquette(s, [0, 1, 2, 3]), [Qd, Qd, Qt, Qt]),
    ]
    worst = 0.0
    for _ in range(trials):
        for k, entangle, ops in cases:
            layout = RegisterLayout(N, k, 0, 1)
            v = rng.normal(size=layout.physical_dim) + 1j * rng.normal(size=layout.physical_dim)
            v /= np.linalg.norm(v)
            lhs = product_state(layout, v, [anc])
            entangle(lhs)
            apply_qudit_gate(lhs, [ancilla_slot(0)], Qt)
            rhs = product_state(layout, v, [anc])
            for l, op in enumerate(ops):
                apply_qudit_gate(rhs, [link_slot(l)], op)
            entangle(rhs)
            worst = max(worst, float(np.linalg.norm(lhs.amplitudes - rhs.amplitudes)))
    return worst
