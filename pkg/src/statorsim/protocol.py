"""The stroboscopic Trotter step and its diagnostics.

One step applies, first to last, ``W_ev, W_eh, W_Be, W_ov, W_oh, W_Bo, W_E,
W_M``: gauge-matter rounds on the four link classes, magnetic rounds on even
and odd plaquettes, then the two single-body terms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import hamiltonian as ham
from . import stator
from .errors import InconsistentPlan
from .lattice import EVEN, ODD, LatticeGeometry, LinkClass, enumerate_plaquettes_by_parity
from .state import StateVector, apply_number_phase, ancilla_return_check

SUBSTEPS = ("ev", "eh", "Be", "ov", "oh", "Bo", "E", "M")
# all gauge-matter classes first, then both magnetic rounds
REORDERED_SUBSTEPS = ("ev", "eh", "ov", "oh", "Be", "Bo", "E", "M")


@dataclass(frozen=True)
class TrotterPlan:
    couplings: ham.CouplingSet
    tau: float
    steps: int
    order: tuple[str, ...] = SUBSTEPS

    def __post_init__(self):
        if self.steps < 1:
            raise InconsistentPlan(f"need at least one step, got {self.steps}")
        if sorted(self.order) != sorted(SUBSTEPS):
            raise InconsistentPlan(f"order must be a permutation of {SUBSTEPS}")

    @classmethod
    def for_time(cls, couplings: ham.CouplingSet, t: float, steps: int, **kw) -> TrotterPlan:
        return cls(couplings, t / steps, steps, **kw)

    @property
    def total_time(self) -> float:
        return self.tau * self.steps


@dataclass
class StepReport:
    gauss_residual: dict[str, float] = field(default_factory=dict)
    ancilla_defect: float = 0.0
    norm_drift: float = 0.0

    @property
    def max_gauss_residual(self) -> float:
        return max(self.gauss_residual.values(), default=0.0)


class AbstractLayer:
    """Executes rounds with the ideal stator unitaries."""

    name = "abstract"

    def __init__(self, compensate: bool = True):
        self.compensate = compensate
        self._phases = {}

    def phases(self, N: int) -> stator.NumberPhases:
        if N not in self._phases:
            self._phases[N] = stator.measure_sandwich_phases(N)
        return self._phases[N]

    def plaquette_routine(self, s, g, p, lambda_B, tau):
        stator.plaquette_routine(s, g, p, lambda_B, tau)

    def gauge_matter_routine(self, s, g, link, lambda_GM, tau):
        phases = self.phases(s.layout.N) if self.compensate else None
        stator.gauge_matter_routine(s, g, link, lambda_GM, tau, compensate=self.compensate, phases=phases)

    def w_E(self, s, g, lambda_E, tau):
        w_E(s, g, lambda_E, tau)

    def w_M(self, s, g, mass, tau):
        w_M(s, g, mass, tau)


def w_E(s: StateVector, g: LatticeGeometry, lambda_E: float, tau: float) -> None:
    """``exp(-i lambda_E tau sum (1 - P - P^dagger))`` including the constant."""
    layout = s.layout
    phase = np.exp(-1j * lambda_E * tau * ham.electric_diag(layout.N))
    view = ham._link_view(s.amplitudes, layout)
    for l in range(layout.num_links):
        view *= ham._link_diag(layout, phase, l)


def w_M(s: StateVector, g: LatticeGeometry, mass: float, tau: float) -> None:
    for i, x in enumerate(g.sites):
        apply_number_phase(s, i, mass * tau * ham.staggered_sign(x))


def w_B_parity(s, g, parity, lambda_B, tau, layer=None) -> None:
    layer = layer or AbstractLayer()
    for p in enumerate_plaquettes_by_parity(g, parity):
        layer.plaquette_routine(s, g, p, lambda_B, tau)


def w_GM_class(s, g, cls, lambda_GM, tau, layer=None) -> None:
    layer = layer or AbstractLayer()
    for link in g.links_of_class(cls):
        layer.gauge_matter_routine(s, g, link, lambda_GM, tau)


def apply_substep(name: str, s: StateVector, g: LatticeGeometry, c: ham.CouplingSet, tau: float, layer=None) -> None:
    layer = layer or AbstractLayer()
    if name in ("ev", "eh", "ov", "oh"):
        w_GM_class(s, g, LinkClass(name), c.lambda_GM, tau, layer)
    elif name in ("Be", "Bo"):
        w_B_parity(s, g, EVEN if name == "Be" else ODD, c.lambda_B, tau, layer)
    elif name == "E":
        layer.w_E(s, g, c.lambda_E, tau)
    elif name == "M":
        layer.w_M(s, g, c.mass, tau)
    else:
        raise ValueError(f"unknown sub-step {name!r}")


def substep_gauss_commutator(name, s, g, c, tau, layer=None) -> float:
    """``max_x ||[W_name, G(x)] s||``."""
    worst = 0.0
    for x in g.sites:
        a = s.copy()
        ham.gauss_apply(a, g, x)
        apply_substep(name, a, g, c, tau, layer)
        b = s.copy()
        apply_substep(name, b, g, c, tau, layer)
        ham.gauss_apply(b, g, x)
        worst = max(worst, float(np.linalg.norm(a.amplitudes - b.amplitudes)))
    return worst


def trotter_step(s: StateVector, g: LatticeGeometry, plan: TrotterPlan, layer=None, diagnostics: bool = False) -> StepReport:
    """Apply one step ``W(tau)`` in place."""
    layer = layer or AbstractLayer()
    report = StepReport()
    n0 = s.norm()
    c = plan.couplings
    for name in plan.order:
        if diagnostics:
            report.gauss_residual[name] = substep_gauss_commutator(name, s, g, c, plan.tau, layer)
        apply_substep(name, s, g, c, plan.tau, layer)
    if s.layout.ancilla_count:
        report.ancilla_defect = max(ancilla_return_check(s, j) for j in range(s.layout.ancilla_count))
    report.norm_drift = abs(s.norm() - n0)
    return report


def trotter_evolve(
    s: StateVector,
    g: LatticeGeometry,
    plan: TrotterPlan,
    t: float,
    layer=None,
    diagnostics: bool = False,
    observer: Callable[[int, StateVector], None] | None = None,
) -> tuple[StateVector, list[StepReport]]:
    """Evolve a copy of ``s`` by ``plan.steps`` steps; ``observer(step, state)`` sees every step."""
    if not math.isclose(plan.total_time, t, rel_tol=0, abs_tol=1e-12):
        raise InconsistentPlan(f"tau * M = {plan.total_time} does not match t = {t}")
    out = s.copy()
    reports = []
    if observer:
        observer(0, out)
    for k in range(plan.steps):
        reports.append(trotter_step(out, g, plan, layer, diagnostics))
        if observer:
            observer(k + 1, out)
    return out, reports


@dataclass
class ScanResult:
    Ms: list[int]
    errors: list[float]

    @property
    def slope(self) -> float:
        return fit_loglog_slope(self.Ms, self.errors)


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def error_scan(
    g: LatticeGeometry,
    c: ham.CouplingSet,
    t: float,
    Ms: Sequence[int],
    initial: StateVector | None = None,
    layer=None,
    workers: int = 1,
) -> ScanResult:
    """``error(M) = ||W(t/M)^M psi0 - exp(-iHt) psi0||`` for every ``M``."""
    psi0 = initial if initial is not None else ham.dirac_sea(g, c.N)
    exact = ham.exact_evolve(psi0, g, c, t)

    def one(M):
        final, _ = trotter_evolve(psi0, g, TrotterPlan.for_time(c, t, M), t, layer)
        return float(np.linalg.norm(final.amplitudes - exact.amplitudes))

    Ms = list(Ms)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            errors = list(pool.map(one, Ms))
    else:
        errors = [one(M) for M in Ms]
    return ScanResult(Ms, errors)
