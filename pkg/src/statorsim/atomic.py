"""Z_2 pulse compilation of the stator unitaries.

Primitive pulses:

* ``V``    ``exp(-i phi n.sigma)`` on link atoms
* ``Vt``   ``exp(-i phi n.sigma)`` on the control (ancilla) atom
* ``U_ab`` link-control collision ``exp(-i phi sigma_z sigma_z~)``
* ``U_bpsi`` control-fermion collision
  ``exp(-i phi' n) exp(-(phi/pi) n log sigma_z~)`` with
  ``log sigma_z = i pi (1 - sigma_z) / 2``
* ``U_t``  fermion tunnelling ``exp(-i phi (psi^dagger chi + h.c.))``

Sequences list pulses in application order (first applied first), i.e. the
reverse of the operator-product notation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import algebra
from . import stator
from .errors import TooLarge, WrongGroupOrder
from .lattice import LatticeGeometry, Link, Plaquette
from .protocol import AbstractLayer
from .state import (
    RegisterLayout,
    Slot,
    StateVector,
    ancilla_slot,
    apply_fermionic_exponential,
    apply_qudit_gate,
    link_slot,
    mode_slot,
    physical_part,
    product_state,
)

X, Y, Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
PULSE_KINDS = ("V", "Vt", "U_ab", "U_bpsi", "U_t")
VERIFY_LIMIT = 2**12


def _require_z2(s: StateVector) -> None:
    if s.layout.N != 2:
        raise WrongGroupOrder(f"atomic pulses need N = 2, got N = {s.layout.N}")


def pulse_V(s: StateVector, targets: Sequence[int], n, phi: float) -> None:
    """Rotate every listed link by ``exp(-i phi n.sigma)``."""
    _require_z2(s)
    R = algebra.rotation(n, phi)
    for l in targets:
        apply_qudit_gate(s, [link_slot(l)], R)


def pulse_Vtilde(s: StateVector, n, phi: float, ancilla: int = 0) -> None:
    _require_z2(s)
    apply_qudit_gate(s, [ancilla_slot(ancilla)], algebra.rotation(n, phi))


def u_ab_gate(phi: float) -> np.ndarray:
    z = np.array([1, -1])
    return np.diag(np.exp(-1j * phi * np.kron(z, z)))


def pulse_U_ab(s: StateVector, link: int, phi: float, ancilla: int = 0) -> None:
    _require_z2(s)
    apply_qudit_gate(s, [link_slot(link), ancilla_slot(ancilla)], u_ab_gate(phi))


def u_bpsi_gate(phi: float, phi_prime: float = 0.0) -> np.ndarray:
    """Gate on ``[mode, ancilla]``."""
    log_sz = 1j * np.pi * (np.eye(2) - algebra.SIGMA_Z) / 2
    occupied = np.exp(-1j * phi_prime) * scipy.linalg.expm(-(phi / np.pi) * log_sz)
    return scipy.linalg.block_diag(np.eye(2), occupied)


def pulse_U_bpsi(s: StateVector, mode: int, phi: float, phi_prime: float = 0.0, ancilla: int = 0) -> None:
    _require_z2(s)
    apply_qudit_gate(s, [mode_slot(mode), ancilla_slot(ancilla)], u_bpsi_gate(phi, phi_prime))


def pulse_U_t(s: StateVector, psi: int, chi: int, phi: float) -> None:
    _require_z2(s)
    apply_fermionic_exponential(s, psi, chi, phi)


@dataclass(frozen=True)
class Pulse:
    kind: str
    angle: float
    targets: tuple[Slot, ...]
    axis: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.kind in ("V", "Vt"):
            if self.axis is None or not np.isclose(np.linalg.norm(self.axis), 1.0):
                raise ValueError("rotation pulses need a unit axis")

    def apply(self, s: StateVector, phi_prime: float = 0.0) -> None:
        t = self.targets
        if self.kind == "V":
            pulse_V(s, [x.index for x in t], self.axis, self.angle)
        elif self.kind == "Vt":
            pulse_Vtilde(s, self.axis, self.angle, t[0].index)
        elif self.kind == "U_ab":
            pulse_U_ab(s, t[0].index, self.angle, t[1].index)
        elif self.kind == "U_bpsi":
            pulse_U_bpsi(s, t[0].index, self.angle, phi_prime, t[1].index)
        else:
            pulse_U_t(s, t[0].index, t[1].index, self.angle)

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "axis": None if self.axis is None else list(self.axis),
            "angle": self.angle,
            "targets": [[x.kind, x.index] for x in self.targets],
        }

    @classmethod
    def from_record(cls, rec: dict) -> Pulse:
        axis = rec.get("axis")
        return cls(
            kind=rec["kind"],
            angle=float(rec["angle"]),
            targets=tuple(Slot(k, int(i)) for k, i in rec["targets"]),
            axis=None if axis is None else tuple(float(a) for a in axis),
        )


@dataclass(frozen=True)
class AtomicSequence:
    pulses: tuple[Pulse, ...]
    claim: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.pulses)

    def apply(self, s: StateVector, phi_prime: float = 0.0) -> None:
        for p in self.pulses:
            p.apply(s, phi_prime)

    def to_json(self) -> str:
        return json.dumps([p.to_record() for p in self.pulses])

    @classmethod
    def from_json(cls, text: str, claim: str = "") -> AtomicSequence:
        return cls(tuple(Pulse.from_record(r) for r in json.loads(text)), claim)


def _links(indices) -> tuple[Slot, ...]:
    return tuple(link_slot(l) for l in indices)


def compile_link_entangler(link: int, ancilla: int = 0) -> AtomicSequence:
    """``V_y^dagger(pi/4) U_ab(pi/4) V_y(pi/4) V_x(pi/4) Vt_z(pi/4)``; equals ``U_link`` up to a global phase."""
    a = (ancilla_slot(ancilla),)
    q = np.pi / 4
    pulses = (
        Pulse("Vt", q, a, Z),
        Pulse("V", q, _links([link]), X),
        Pulse("V", q, _links([link]), Y),
        Pulse("U_ab", q, (link_slot(link), ancilla_slot(ancilla))),
        Pulse("V", -q, _links([link]), Y),
    )
    return AtomicSequence(pulses, "link_entangler", {"link": link, "ancilla": ancilla})


def compile_plaquette_entangler(links: Sequence[int], ancilla: int = 0, ancilla_angle: float = np.pi) -> AtomicSequence:
    """Shared-step plaquette entangler: one group of link rotations, four collisions.

    Each link needs its own ``Vt_z(pi/4)``; the shared ancilla rotation is
    therefore ``Vt_z(4 * pi/4) = Vt_z(pi)`` (a global sign).  Passing
    ``ancilla_angle=pi/4`` reproduces the single-link angle, which leaves a
    residual ancilla z-rotation.
    """
    a = (ancilla_slot(ancilla),)
    q = np.pi / 4
    ls = _links(links)
    pulses = (
        Pulse("Vt", ancilla_angle, a, Z),
        Pulse("V", q, ls, X),
        Pulse("V", q, ls, Y),
        *(Pulse("U_ab", q, (link_slot(l), ancilla_slot(ancilla))) for l in links),
        Pulse("V", -q, ls, Y),
    )
    return AtomicSequence(pulses, "plaquette_entangler", {"links": list(links), "ancilla": ancilla})


def compile_link_interaction(psi: int, chi: int, theta: float, ancilla: int = 0) -> AtomicSequence:
    """``Vt_y^dagger(pi/4) U_bpsi(pi) Vt_y(pi/2) U_t(theta) U_bpsi(pi) Vt_y^dagger(pi/4)`` with ``theta = lambda_GM tau``."""
    a = (ancilla_slot(ancilla),)
    q = np.pi / 4
    bpsi = (mode_slot(psi), ancilla_slot(ancilla))
    pulses = (
        Pulse("Vt", -q, a, Y),
        Pulse("U_bpsi", np.pi, bpsi),
        Pulse("U_t", theta, (mode_slot(psi), mode_slot(chi))),
        Pulse("Vt", 2 * q, a, Y),
        Pulse("U_bpsi", np.pi, bpsi),
        Pulse("Vt", -q, a, Y),
    )
    return AtomicSequence(pulses, "link_interaction", {"psi": psi, "chi": chi, "theta": theta})


def matter_half(psi: int, left: bool, ancilla: int = 0) -> AtomicSequence:
    """``Vt_y(pi/4) U_bpsi(pi) Vt_y^dagger(pi/4)`` (``left=False``) or the mirrored half."""
    a = (ancilla_slot(ancilla),)
    q = np.pi / 4
    sgn = -1 if left else 1
    bpsi = (mode_slot(psi), ancilla_slot(ancilla))
    pulses = (Pulse("Vt", sgn * q, a, Y), Pulse("U_bpsi", np.pi, bpsi), Pulse("Vt", -sgn * q, a, Y))
    return AtomicSequence(pulses, "matter_half")


# -- dense comparison ---------------------------------------------------------------


def dense_unitary(apply: Callable[[StateVector], None], layout: RegisterLayout, ready_ancilla: bool = False) -> np.ndarray:
    """Matrix of a state map, built by probing every basis vector.

    With ``ready_ancilla`` the probes are physical basis vectors with every
    ancilla in its uniform state, and the outputs are projected back onto
    that state; an ancilla left entangled makes the result non-unitary.
    """
    if layout.dim > VERIFY_LIMIT:
        raise TooLarge(f"dense comparison limited to dimension {VERIFY_LIMIT}")
    dim = layout.physical_dim if ready_ancilla else layout.dim
    U = np.empty((dim, dim), dtype=complex)
    for j in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[j] = 1.0
        s = product_state(layout, e) if ready_ancilla else StateVector(layout, e)
        apply(s)
        U[:, j] = physical_part(s) if ready_ancilla else s.amplitudes
    return U


@dataclass
class CompileReport:
    distance: float
    global_phase: float
    number_phases: stator.NumberPhases | None = None


def verify_compiled(
    seq: AtomicSequence | Callable[[StateVector], None],
    target: Callable[[StateVector], None],
    layout: RegisterLayout,
    number_phase_mode: int | None = None,
    phi_prime: float = 0.0,
    ready_ancilla: bool = False,
) -> CompileReport:
    """Operator distance between a compiled sequence and its abstract target.

    Fits ``C = exp(i g) D_after T D_before`` where ``D_* = exp(-i phi_* n)``
    on ``number_phase_mode`` (omitted: global phase only) and returns the
    spectral norm of the residual.  ``ready_ancilla`` restricts the
    comparison to inputs with the ancillas in their uniform state.
    """
    apply_c = (lambda s: seq.apply(s, phi_prime)) if isinstance(seq, AtomicSequence) else seq
    C = dense_unitary(apply_c, layout, ready_ancilla)
    T = dense_unitary(target, layout, ready_ancilla)
    prod = C * T.conj()
    if number_phase_mode is None:
        g = float(np.angle(prod.sum()))
        return CompileReport(float(np.linalg.norm(C - np.exp(1j * g) * T, 2)), g)

    n = (np.arange(C.shape[0]) >> number_phase_mode) & 1
    cls = {}
    for a in (0, 1):
        for b in (0, 1):
            cls[a, b] = prod[np.ix_(n == a, n == b)].sum()
    g = float(np.angle(cls[0, 0]))
    w = np.exp(-1j * g)
    if abs(cls[1, 0]) > 1e-9:
        after = -float(np.angle(cls[1, 0] * w))
        before = -float(np.angle(cls[1, 1] * w)) - after
    else:
        after, before = 0.0, -float(np.angle(cls[1, 1] * w))
    d_after = np.exp(-1j * after * n)
    d_before = np.exp(-1j * before * n)
    model = np.exp(1j * g) * (d_after[:, None] * T * d_before[None, :])
    phases = stator.NumberPhases(float(np.angle(np.exp(1j * before))), float(np.angle(np.exp(1j * after))))
    return CompileReport(float(np.linalg.norm(C - model, 2)), g, phases)


# -- layer ------------------------------------------------------------------------


class AtomicLayer(AbstractLayer):
    """Runs every round through compiled pulses (N = 2 only).

    ``phi_prime`` is the collision's stray occupation phase; with
    ``compensate`` the measured stray phases of the matter sandwich are
    undone so the round equals the ideal one up to a global phase.
    """

    name = "atomic"

    def __init__(self, compensate: bool = True, phi_prime: float = 0.0, angle_error: float = 0.0):
        super().__init__(compensate)
        self.phi_prime = phi_prime
        self.angle_error = angle_error

    def _entangle_link(self, s, link, dagger, ancilla):
        seq = compile_link_entangler(link, ancilla)
        if self.angle_error:
            seq = perturb(seq, self.angle_error)
        seq.apply(s)

    def _entangle_plaquette(self, s, links, dagger, ancilla):
        seq = compile_plaquette_entangler(links, ancilla)
        if self.angle_error:
            seq = perturb(seq, self.angle_error)
        seq.apply(s)

    def _sandwich(self, s, psi, chi, theta, ancilla):
        compile_link_interaction(psi, chi, theta, ancilla).apply(s, self.phi_prime)

    def phases(self, N: int) -> stator.NumberPhases:
        if N not in self._phases:
            self._phases[N] = stator.measure_sandwich_phases(N, self._sandwich)
        return self._phases[N]

    def plaquette_routine(self, s, g, p, lambda_B, tau):
        _require_z2(s)
        links = [g.link_index(l) for l in g.plaquette_links(p)]
        stator._require_ready(s, 0)
        self._entangle_plaquette(s, links, False, 0)
        # Vt_x(2 lambda_B tau) = exp(-i lambda_B tau (Qt + Qt^dagger)) for N = 2
        pulse_Vtilde(s, X, 2 * lambda_B * tau)
        self._entangle_plaquette(s, links, True, 0)

    def gauge_matter_routine(self, s, g, link, lambda_GM, tau):
        _require_z2(s)
        stator.gauge_matter_routine(
            s, g, link, lambda_GM, tau,
            compensate=self.compensate,
            sandwich=self._sandwich,
            entangler=self._entangle_link,
            phases=self.phases(2) if self.compensate else None,
        )

    def w_E(self, s, g, lambda_E, tau):
        # V_z^dagger(2 tau lambda_E) = exp(-i H_E tau) up to the constant's global phase
        pulse_V(s, range(g.num_links), Z, -2 * tau * lambda_E)


def perturb(seq: AtomicSequence, delta: float) -> AtomicSequence:
    """Copy of ``seq`` with every collision angle shifted by ``delta`` (negative control)."""
    pulses = tuple(
        Pulse(p.kind, p.angle + delta, p.targets, p.axis) if p.kind == "U_ab" else p for p in seq.pulses
    )
    return AtomicSequence(pulses, seq.claim + "+perturbed", seq.metadata)
