"""Cross-check suites: each engine against an independent reference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .harmonic import (
    HarmonicParams,
    imbalance,
    imbalance_from_correlation,
    initial_correlation,
    propagate_correlation_matrix,
)
from .models import BoseHubbard, JaynesCummings
from .network import AllToAll, FiniteRange, NetworkSpec, single_particle_hamiltonian
from .quantum import simulate as simulate_quantum
from .semiclassical import IntegratorConfig, simulate_bh, simulate_jc


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    error: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(self.error <= self.tol)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "error": self.error, "tol": self.tol, "ok": self.ok}


def analytic_vs_matrix(N_max: int = 12, n_times: int = 200, t_max: float = 20.0) -> list[CheckResult]:
    """Finite-range and all-to-all closed forms against correlation-matrix propagation."""
    t = np.linspace(0.0, t_max, n_times)
    out = []
    for N in range(2, N_max + 1):
        for D in list(range(1, math.ceil(N / 2))) + [None]:
            conn = AllToAll() if D is None else FiniteRange(D)
            spec = NetworkSpec(N, connectivity=conn)
            h = single_particle_hamiltonian(spec, 1.0)
            P_ref = imbalance_from_correlation(propagate_correlation_matrix(h, initial_correlation(N, 3), t))
            P = imbalance(HarmonicParams(N, D, Np=3), t)
            label = f"N={N} " + ("all-to-all" if D is None else f"D={D}")
            out.append(CheckResult("analytic-vs-matrix", label, float(np.max(np.abs(P - P_ref))), 1e-8))
    return out


def sector_equivalence() -> list[CheckResult]:
    """Sector-restricted and full-space quantum evolution give the same occupations."""
    t = np.linspace(0.0, 5.0, 51)
    cases = [
        ("BH N=3 Np=3 U=0.7", NetworkSpec(3, connectivity=AllToAll()), BoseHubbard(1.0, 0.7), 3),
        ("JC N=2 Np=2 g=0.5", NetworkSpec(2, connectivity=AllToAll()), JaynesCummings(1.0, 1.2, 0.5), 2),
        ("JC N=4 Np=2 g=1 ring D=1", NetworkSpec(4, connectivity=FiniteRange(1)), JaynesCummings(1.0, 1.0, 1.0), 2),
    ]
    out = []
    for label, spec, model, Np in cases:
        a = simulate_quantum(spec, model, Np, t, sector=True)
        b = simulate_quantum(spec, model, Np, t, sector=False)
        out.append(CheckResult("sector-equivalence", label, float(np.max(np.abs(a.n - b.n))), 1e-9))
    return out


def linear_limit(N: int = 3, Np: int = 4, t_max: float = 20.0, tol: float = 1e-6) -> list[CheckResult]:
    """g = 0 / U = 0 runs of the nonlinear engines against the harmonic closed form."""
    spec = NetworkSpec(N, connectivity=AllToAll())
    h = single_particle_hamiltonian(spec, 1.0)
    cfg = IntegratorConfig(dt=1e-3, t_max=t_max, sample_every=10)
    t = cfg.times
    P_ref = imbalance(HarmonicParams(N, None, Np=Np), t)
    runs = [
        ("semiclassical JC g=0", simulate_jc(h, JaynesCummings(1.0, 1.0, 0.0), Np, cfg)),
        ("semiclassical BH U=0", simulate_bh(h, BoseHubbard(1.0, 0.0), Np, cfg)),
        ("quantum JC g=0", simulate_quantum(spec, JaynesCummings(1.0, 1.0, 0.0), Np, t)),
        ("quantum BH U=0", simulate_quantum(spec, BoseHubbard(1.0, 0.0), Np, t)),
    ]
    return [CheckResult("linear-limit", label, float(np.max(np.abs(tr.P - P_ref))), tol) for label, tr in runs]


SUITES = {
    "analytic-vs-matrix": analytic_vs_matrix,
    "sector-equivalence": sector_equivalence,
    "linear-limit": linear_limit,
}


def run_suites(names=None) -> list[CheckResult]:
    names = list(SUITES) if not names else names
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite {unknown[0]!r}; one of {', '.join(SUITES)}")
    results = []
    for n in names:
        results.extend(SUITES[n]())
    return results
