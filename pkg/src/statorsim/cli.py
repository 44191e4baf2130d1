"""Batch harness: ``sim verify|evolve|scaling|info --config cfg.json``.

Outputs go to ``<output>/results.csv`` and ``<output>/report.json``.  Exit
codes: 0 pass, 1 check failure, 2 configuration error, 3 resource guard.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import hamiltonian as ham
from .atomic import AtomicLayer
from .errors import ConfigError, GeometryError, TooLarge
from .lattice import LatticeGeometry
from .protocol import AbstractLayer, TrotterPlan, error_scan, trotter_step
from .state import MAX_DIM, StateVector, fidelity_up_to_phase
from .verify import Check, run_suite

log = logging.getLogger("statorsim")

MODES = ("verify", "evolve", "scaling", "info")
LAYERS = ("abstract", "atomic")
OBSERVABLES = ("electricEnergy", "plaquetteAvg", "density", "totalEnergy", "gaussResidual")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3
SLOPE_WINDOW = (-1.1, -0.9)


@dataclass
class RunConfig:
    Lx: int = 2
    Ly: int = 2
    N: int = 2
    lambdaE: float = 1.0
    lambdaB: float = 1.0
    lambdaGM: float = 1.0
    mass: float = 1.0
    t: float = 1.0
    M: int = 10
    mode: str = "info"
    layer: str = "abstract"
    phaseCompensation: bool = True
    observables: list[str] = field(default_factory=lambda: list(OBSERVABLES))
    seed: int = 0
    output: str = "results"
    Ms: list[int] = field(default_factory=lambda: [10, 20, 40, 80, 160, 320])
    verifySteps: int = 100
    verifyTau: float = 0.1
    perturbAngle: float = 0.0
    exact: bool = False
    workers: int = 1

    # nested JSON layout -> flat fields
    _SECTIONS = {
        "lattice": ("Lx", "Ly"),
        "couplings": ("lambdaE", "lambdaB", "lambdaGM", "mass"),
        "time": ("t", "M"),
        "scaling": ("Ms",),
        "verify": ("verifySteps", "verifyTau", "perturbAngle"),
    }

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        flat = {}
        fields = set(cls.__dataclass_fields__)
        for key, value in d.items():
            if key in cls._SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be an object")
                for sub, v in value.items():
                    if sub not in cls._SECTIONS[key]:
                        raise ConfigError(f"unknown key {key}.{sub}")
                    flat[sub] = v
            elif key in fields:
                flat[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**flat)

    def to_dict(self) -> dict:
        flat = asdict(self)
        out = {}
        for section, keys in self._SECTIONS.items():
            out[section] = {k: flat.pop(k) for k in keys}
        out.update(flat)
        return out

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @property
    def geometry(self) -> LatticeGeometry:
        return LatticeGeometry(self.Lx, self.Ly)

    @property
    def couplings(self) -> ham.CouplingSet:
        return ham.CouplingSet(self.lambdaE, self.lambdaB, self.lambdaGM, self.mass, self.N)

    def layer_impl(self):
        if self.layer == "atomic":
            return AtomicLayer(compensate=self.phaseCompensation)
        return AbstractLayer(compensate=self.phaseCompensation)

    def validate(self) -> None:
        """Raise ConfigError for bad values, TooLarge for the register guard."""
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.layer not in LAYERS:
            raise ConfigError(f"layer must be one of {LAYERS}")
        if not isinstance(self.N, int) or self.N < 2:
            raise ConfigError("N must be an integer >= 2")
        if self.layer == "atomic" and self.N != 2:
            raise ConfigError("the atomic layer is Z_2 only (N = 2)")
        if self.perturbAngle and self.N != 2:
            raise ConfigError("perturbAngle acts on compiled pulses, which need N = 2")
        try:
            g = self.geometry
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc
        if self.t < 0:
            raise ConfigError("t must be non-negative")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if len(self.Ms) < 2 or any(int(m) != m or m < 1 for m in self.Ms):
            raise ConfigError("scaling needs at least two positive integer step counts")
        if self.mode == "scaling" and self.t <= 0:
            raise ConfigError("scaling needs t > 0")
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise ConfigError(f"unknown observables {sorted(bad)}")
        dim = self.N ** (g.num_links + 1) * 2**g.num_sites
        if dim > MAX_DIM:
            raise TooLarge(f"register dimension {dim} exceeds guard {MAX_DIM}")


# -- output -----------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path: Path, cfg: RunConfig, header: list[str], rows: list[list], extra_meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# statorsim {__version__}\n")
        fh.write(f"# config_sha256 {cfg.digest()}\n")
        fh.write(f"# config {json.dumps(cfg.to_dict(), sort_keys=True)}\n")
        for k, v in (extra_meta or {}).items():
            fh.write(f"# {k} {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


def write_report(path: Path, cfg: RunConfig, checks: list[Check], extra: dict | None = None) -> None:
    report = {
        "version": __version__,
        "mode": cfg.mode,
        "config_sha256": cfg.digest(),
        "checks": [c.as_dict() for c in checks],
        "passed": all(c.passed for c in checks),
    }
    report.update(extra or {})
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


# -- drivers --------------------------------------------------------------------------


def run_verify(cfg: RunConfig) -> tuple[int, list[Check]]:
    rng = np.random.default_rng(cfg.seed)
    checks = run_suite(
        cfg.geometry,
        cfg.couplings,
        cfg.verifyTau,
        rng,
        steps=cfg.verifySteps,
        layer=cfg.layer_impl(),
        angle_error=cfg.perturbAngle,
    )
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.json", cfg, checks)
    for c in checks:
        log.info("%-32s %.3e < %.0e  %s", c.name, c.residual, c.threshold, "PASS" if c.passed else "FAIL")
    failed = [c.name for c in checks if not c.passed]
    if failed:
        log.error("failing checks: %s", ", ".join(failed))
    return (EXIT_FAIL if failed else EXIT_OK), checks


def observable_row(s: StateVector, g, c, observables) -> list[float]:
    row = []
    for name in observables:
        if name == "electricEnergy":
            row.append(ham.expectation(s, g, c, ["E"]))
        elif name == "plaquetteAvg":
            row.append(ham.plaquette_average(s, g, c.N))
        elif name == "density":
            row.extend(ham.site_densities(s, g))
        elif name == "totalEnergy":
            row.append(ham.expectation(s, g, c))
        elif name == "gaussResidual":
            row.append(ham.gauss_residual(s, g))
    return row


def observable_header(g, observables) -> list[str]:
    cols = []
    for name in observables:
        cols.extend([f"density_{i}" for i in range(g.num_sites)] if name == "density" else [name])
    return cols


def run_evolve(cfg: RunConfig) -> tuple[int, list[Check]]:
    g, c = cfg.geometry, cfg.couplings
    psi0 = ham.dirac_sea(g, c.N)
    n0 = psi0.norm()
    header = ["step", "time"] + observable_header(g, cfg.observables) + ["fermionNumber", "ancillaDefect", "normDrift"]
    if cfg.exact:
        header.append("exactFidelity")
    rows = []

    def emit(step, s, report=None):
        row = [step, step * tau] + observable_row(s, g, c, cfg.observables)
        row += [ham.fermion_number(s), report.ancilla_defect if report else 0.0, abs(s.norm() - n0)]
        if cfg.exact:
            ref = ham.exact_evolve(psi0, g, c, step * tau)
            row.append(fidelity_up_to_phase(s, ref))
        rows.append(row)

    if cfg.t == 0:
        tau = 0.0
        emit(0, psi0)
    else:
        plan = TrotterPlan.for_time(c, cfg.t, cfg.M)
        tau = plan.tau
        layer = cfg.layer_impl()
        s = psi0.copy()
        for k in range(1, cfg.M + 1):
            report = trotter_step(s, g, plan, layer)
            emit(k, s, report)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", cfg, header, rows)
    gi = header.index("gaussResidual") if "gaussResidual" in header else None
    fi = header.index("fermionNumber")
    checks = [Check("fermion_number_drift", max(abs(r[fi] - rows[0][fi]) for r in rows) if rows else 0.0, 1e-9)]
    if gi is not None:
        checks.append(Check("gauss_residual", max(r[gi] for r in rows), 1e-9))
    write_report(out / "report.json", cfg, checks)
    return (EXIT_OK if all(ch.passed for ch in checks) else EXIT_FAIL), checks


def run_scaling(cfg: RunConfig) -> tuple[int, list[Check]]:
    g, c = cfg.geometry, cfg.couplings
    result = error_scan(g, c, cfg.t, [int(m) for m in cfg.Ms], layer=cfg.layer_impl(), workers=cfg.workers)
    slope = result.slope
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", cfg, ["M", "error"], [[m, e] for m, e in zip(result.Ms, result.errors)], {"slope": repr(slope)})
    lo, hi = SLOPE_WINDOW
    # distance of the slope from the centre of the window, threshold half its width
    centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    checks = [Check("loglog_slope", abs(slope - centre), half)]
    write_report(out / "report.json", cfg, checks, {"slope": slope})
    log.info("log-log slope %.4f", slope)
    return (EXIT_OK if checks[0].passed else EXIT_FAIL), checks


def run_info(cfg: RunConfig) -> dict:
    g = cfg.geometry
    layout = ham.register_layout(g, cfg.N)
    return {
        "lattice": f"{g.Lx}x{g.Ly}",
        "sites": g.num_sites,
        "links": g.num_links,
        "plaquettes": g.num_plaquettes,
        "N": cfg.N,
        "dimension": layout.dim,
        "physical_dimension": layout.physical_dim,
        "state_bytes": layout.dim * 16,
        "dense_reference": layout.physical_dim <= ham.DENSE_LIMIT,
    }


# -- entry point ----------------------------------------------------------------------


def _parse_lattice(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError as exc:
        raise ConfigError(f"lattice must look like LxxLy, e.g. 2x2; got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=MODES)
    p.add_argument("--config", type=Path)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--out", dest="output")
    p.add_argument("--t", type=float)
    p.add_argument("--steps", type=int, dest="M")
    p.add_argument("--lattice")
    p.add_argument("--layer", choices=LAYERS)
    p.add_argument("--seed", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--perturb", type=float, dest="perturbAngle", help="collision angle error (negative control)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = RunConfig.from_dict(data)
    for name in ("output", "t", "M", "layer", "seed", "N", "perturbAngle"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    if args.lattice:
        cfg.Lx, cfg.Ly = _parse_lattice(args.lattice)
    mode = args.command or args.mode
    if mode:
        cfg.mode = mode
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args)
        cfg.validate()
        if cfg.mode == "info":
            print(json.dumps(run_info(cfg), indent=2))
            return EXIT_OK
        driver = {"verify": run_verify, "evolve": run_evolve, "scaling": run_scaling}[cfg.mode]
        code, checks = driver(cfg)
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name} residual={c.residual:.3e} threshold={c.threshold:.0e}")
        return code
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TooLarge as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
