"""Identity checks shared by the ``verify`` driver and the test-suite."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from . import atomic
from . import hamiltonian as ham
from . import stator
from .errors import AncillaNotReady
from .lattice import LatticeGeometry
from .protocol import SUBSTEPS, AbstractLayer, TrotterPlan, substep_gauss_commutator, trotter_step
from .state import (
    RegisterLayout,
    StateVector,
    ancilla_return_check,
    apply_qudit_gate,
    fidelity_up_to_phase,
    link_slot,
    physical_part,
    product_state,
)


@dataclass
class Check:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual < self.threshold)

    def as_dict(self) -> dict:
        return {**asdict(self), "pass": self.passed}


def random_physical(layout: RegisterLayout, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=layout.physical_dim) + 1j * rng.normal(size=layout.physical_dim)
    return v / np.linalg.norm(v)


def random_gauss_state(g: LatticeGeometry, N: int, rng: np.random.Generator, ancilla_count: int = 1) -> StateVector:
    """Random state in the ``G(x) = 1`` sector with ancillas in the uniform state."""
    layout = ham.register_layout(g, N, ancilla_count)
    phys = StateVector(layout.without_ancilla(), random_physical(layout, rng))
    phys = ham.project_gauss_sector(phys, g)
    return product_state(layout, phys.amplitudes / phys.norm())


def check_eigenoperator(g, N, rng, trials=100) -> Check:
    res = stator.check_eigenoperator(stator.StatorContext(g, N), trials, rng)
    return Check(f"eigenoperator_N{N}", res, 1e-12)


def plaquette_oracle_defects(g, c, tau, rng) -> tuple[float, float]:
    """Worst ``1 - fidelity`` against the dense plaquette exponential and worst ancilla defect."""
    layout = ham.register_layout(g, c.N)
    U = scipy.linalg.expm(-1j * c.lambda_B * tau * ham.local_plaquette_term(c.N))
    worst_f = worst_a = 0.0
    for p in g.plaquettes:
        v = random_physical(layout, rng)
        s = product_state(layout, v)
        stator.plaquette_routine(s, g, p, c.lambda_B, tau)
        ref = product_state(layout, v)
        apply_qudit_gate(ref, [link_slot(g.link_index(l)) for l in g.plaquette_links(p)], U)
        worst_f = max(worst_f, 1 - fidelity_up_to_phase(s, ref), 0.0)
        worst_a = max(worst_a, ancilla_return_check(s))
    return worst_f, worst_a


def gauge_matter_oracle_defect(g, c, tau, rng, layer=None) -> float:
    """Worst ``1 - fidelity`` of every link's routine against the dense one-link exponential."""
    layer = layer or AbstractLayer()
    layout = ham.register_layout(g, c.N)
    worst = 0.0
    for link in g.links:
        a, b = g.site_index(link.origin), g.site_index(g.head(link))
        U = scipy.linalg.expm(-1j * c.lambda_GM * tau * ham.local_hopping_term(c.N, g.num_sites, a, b))
        v = random_physical(layout, rng)
        s = product_state(layout, v)
        layer.gauge_matter_routine(s, g, link, c.lambda_GM, tau)
        ref = product_state(layout, v)
        apply_qudit_gate(ref, ham.link_targets(g, g.link_index(link)), U)
        worst = max(worst, 1 - fidelity_up_to_phase(s, ref), 0.0)
    return worst


def substep_commutators(g, c, tau, rng, layer=None) -> dict[str, float]:
    s = random_gauss_state(g, c.N, rng)
    # a generic state exposes commutators that a sector state would hide
    s = product_state(s.layout, random_physical(s.layout, rng))
    return {name: substep_gauss_commutator(name, s, g, c, tau, layer) for name in SUBSTEPS}


def gauss_after_steps(g, c, tau, steps, rng, layer=None) -> float:
    s = random_gauss_state(g, c.N, rng)
    plan = TrotterPlan(c, tau, steps)
    worst = 0.0
    for _ in range(steps):
        trotter_step(s, g, plan, layer)
        worst = max(worst, ham.gauss_residual(s, g))
    return worst


def compiled_entangler_distances(angle_error: float = 0.0) -> dict[str, float]:
    link_seq = atomic.compile_link_entangler(0)
    plaq_seq = atomic.compile_plaquette_entangler([0, 1, 2, 3])
    if angle_error:
        link_seq = atomic.perturb(link_seq, angle_error)
        plaq_seq = atomic.perturb(plaq_seq, angle_error)
    link = atomic.verify_compiled(link_seq, lambda s: stator.entangle_link(s, 0), RegisterLayout(2, 1, 0, 1))
    plaq = atomic.verify_compiled(
        plaq_seq, lambda s: stator.entangle_plaquette(s, [0, 1, 2, 3]), RegisterLayout(2, 4, 0, 1)
    )
    return {"link": link.distance, "plaquette": plaq.distance}


def compiled_interaction_distance(theta: float = 0.37, phi_prime: float = 0.0) -> atomic.CompileReport:
    return atomic.verify_compiled(
        atomic.compile_link_interaction(0, 1, theta),
        lambda s: stator._abstract_sandwich(s, 0, 1, theta, 0),
        RegisterLayout(2, 0, 2, 1),
        number_phase_mode=0,
        phi_prime=phi_prime,
    )


def compiled_step_defect(g, c, tau, rng, angle_error: float = 0.0) -> float:
    """``1 - fidelity`` between a fully compiled step and the abstract step.

    A miscalibrated sequence that leaves the ancilla entangled is caught by the
    readiness guard of the next routine; that defect is reported instead.
    """
    s = random_gauss_state(g, 2, rng)
    plan = TrotterPlan(c, tau, 1)
    a, b = s.copy(), s.copy()
    trotter_step(a, g, plan, AbstractLayer())
    try:
        trotter_step(b, g, plan, atomic.AtomicLayer(angle_error=angle_error))
    except AncillaNotReady as exc:
        return exc.defect
    return max(0.0, 1 - fidelity_up_to_phase(a, b))


def run_suite(g: LatticeGeometry, c: ham.CouplingSet, tau: float, rng, steps: int = 100, layer=None, angle_error: float = 0.0) -> list[Check]:
    checks = [check_eigenoperator(g, c.N, rng)]
    f, a = plaquette_oracle_defects(g, c, tau, rng)
    checks += [Check("plaquette_routine", f, 1e-12), Check("plaquette_ancilla_return", a, 1e-12)]
    checks.append(Check("gauge_matter_routine", gauge_matter_oracle_defect(g, c, tau, rng, layer), 1e-11))
    for name, r in substep_commutators(g, c, tau, rng, layer).items():
        checks.append(Check(f"gauss_commutator_{name}", r, 1e-11))
    checks.append(Check("gauss_sector_after_steps", gauss_after_steps(g, c, tau, steps, rng, layer), 1e-9))
    if c.N == 2:
        for name, d in compiled_entangler_distances(angle_error).items():
            checks.append(Check(f"compiled_{name}_entangler", d, 1e-10))
        checks.append(Check("compiled_link_interaction", compiled_interaction_distance().distance, 1e-10))
        checks.append(Check("compiled_trotter_step", compiled_step_defect(g, c, tau, rng, angle_error), 1e-9))
    return checks
