"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line (also collected into the
pytest terminal summary).  Run directly with ``python tests/test_acceptance.py``
to get just the verdict lines.

Units: J = 1 and omega_c = omega_q = 1, so 0.01 omega_c = 0.01 J.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from acceptance_log import report
from qnet.checks import linear_limit
from qnet.cli import main as cli_main
from qnet.config import build_config
from qnet.diagnostics import detect_n_star, eta_from_imbalance, first_drop_time, imbalance
from qnet.engines import run
from qnet.harmonic import (
    HarmonicParams,
    eta_all_to_all_closed_form,
    imbalance_from_correlation,
    initial_correlation,
    propagate_correlation_matrix,
)
from qnet.harmonic import imbalance as harmonic_imbalance
from qnet.lindblad import OpenSystemRates, simulate_open
from qnet.models import BoseHubbard, JaynesCummings
from qnet.network import AllToAll, FiniteRange, NetworkSpec, single_particle_hamiltonian
from qnet.semiclassical import IntegratorConfig
from qnet.sweep import plan_from_dict, run_sweep


# --- 1 ---------------------------------------------------------------------------

def test_criterion_01_harmonic_closed_form():
    Ns = range(2, 51)
    t0 = time.perf_counter()
    sim_err = form_err = 0.0
    for N in Ns:
        res = run(build_config({"engine": "harmonic", "N": N, "Np": 10, "connectivity": "all_to_all"}))
        # eta from the simulated occupations, not from the closed-form P the engine reports
        eta_sim = eta_from_imbalance(imbalance(res.trajectory.n), 10)
        ref = eta_all_to_all_closed_form(N)
        sim_err = max(sim_err, abs(eta_sim - ref))
        P_min = harmonic_imbalance(HarmonicParams(N, Np=10), math.pi / N)[0]
        form_err = max(form_err, abs((10 + P_min) / 20 - ref))
    elapsed = time.perf_counter() - t0
    ok = sim_err <= 1e-4 and form_err <= 1e-12 and elapsed < 1.0
    report(1, "harmonic all-to-all eta = 1 - 4/N + 4/N^2", ok,
           f"N=2..50 max|eta_sim - ref|={sim_err:.2e} (tol 1e-4), closed form {form_err:.2e} (tol 1e-12), "
           f"runtime {elapsed:.2f}s (< 1s)")
    assert ok


# --- 2 ---------------------------------------------------------------------------

def test_criterion_02_finite_range_vs_correlation_matrix():
    t = np.linspace(0.0, 50.0, 500)
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for N in range(3, 21):
        for D in range(1, math.ceil(N / 2)):
            h = single_particle_hamiltonian(NetworkSpec(N, connectivity=FiniteRange(D)), 1.0)
            C = propagate_correlation_matrix(h, initial_correlation(N, 10), t)
            P = harmonic_imbalance(HarmonicParams(N, D, Np=10), t)
            worst = max(worst, float(np.max(np.abs(P - imbalance_from_correlation(C)))))
            cases += 1
    elapsed = time.perf_counter() - t0
    t_fine = np.linspace(0.0, 50.0, 5001)
    etas = {D: eta_from_imbalance(harmonic_imbalance(HarmonicParams(50, D, Np=10), t_fine), 10) for D in range(1, 26)}
    collapse = max(etas[D] for D in range(1, 25))
    ok = worst <= 1e-8 and elapsed < 10 and etas[25] > 0.9 and collapse < 0.1
    report(2, "finite-range closed form vs correlation matrix", ok,
           f"{cases} (N,D) cases max|dP|={worst:.2e} (tol 1e-8), runtime {elapsed:.2f}s (< 10s); "
           f"N=50: eta(D=25)={etas[25]:.4f}, max eta(D<25)={collapse:.4f}")
    assert ok


# --- 3 ---------------------------------------------------------------------------

def test_criterion_03_linear_limits():
    results = linear_limit(N=3, Np=4, t_max=20.0, tol=1e-6)
    ok = all(r.ok for r in results)
    detail = ", ".join(f"{r.name}: {r.error:.1e}" for r in results)
    report(3, "g=0 / U=0 reduce to harmonic P(t) on [0, 20]", ok, detail + " (tol 1e-6)")
    assert ok


# --- 4 ---------------------------------------------------------------------------

G_GRID_FIG3 = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0)
MONOTONE_NOISE = 0.05


def test_criterion_04_quantum_jc_self_trapping():
    etas = []
    for g in G_GRID_FIG3:
        cfg = build_config({"engine": "quantum", "model": "jc", "N": 5, "Np": 10, "g": g, "t_max": 50,
                            "samples": 5001})
        etas.append(run(cfg).summary.eta)
    etas = np.array(etas)
    drops = np.maximum(0.0, etas[:-1] - etas[1:])
    high = etas[-1] > 0.9
    low = etas[0] < 0.2
    mono = drops.max() <= MONOTONE_NOISE
    ok = high and low and mono
    report(4, "quantum JC N=5 Np=10: eta(g) rises from < 0.2 to > 0.9", ok,
           "eta(g) = " + ", ".join(f"{g:g}:{e:.3f}" for g, e in zip(G_GRID_FIG3, etas))
           + f" | largest-g > 0.9: {high}; smallest-g < 0.2: {low}; "
           f"largest drop {drops.max():.3f} (noise {MONOTONE_NOISE})")
    assert ok


# --- 5 ---------------------------------------------------------------------------

def _saturated_P(N, U):
    cfg = build_config({"engine": "quantum", "model": "bh", "N": N, "Np": 10, "U": U, "t_max": 50, "samples": 5001})
    traj = run(cfg).trajectory
    return float(np.mean(traj.P[traj.times >= 25.0]))


def test_criterion_05_quantum_bh_non_monotonicity():
    P = {(N, U): _saturated_P(N, U) for N in (3, 4) for U in (0.1, 1.0)}
    weak = P[4, 0.1] > P[3, 0.1]
    strong = P[4, 1.0] < P[3, 1.0]
    ok = weak and strong
    report(5, "quantum BH N in {3,4}: ordering flips between U=0.1 and U=1", ok,
           f"late-time mean P: U=0.1 N3={P[3, 0.1]:.3f} N4={P[4, 0.1]:.3f}; "
           f"U=1 N3={P[3, 1.0]:.3f} N4={P[4, 1.0]:.3f}")
    assert ok


# --- 6 ---------------------------------------------------------------------------

def test_criterion_06_semiclassical_bh_n_star():
    plan = plan_from_dict({
        "base": {"engine": "semiclassical-bh", "N": 2, "Np": 10, "t_max": 50, "samples": 5001},
        "axes": [{"name": "U", "values": [1.0, 2.0, 4.0]}, {"name": "N", "range": [2, 50]}],
    })
    res = run_sweep(plan)
    Ns = list(range(2, 51))
    stars = [detect_n_star(Ns, res.eta[i]) for i in range(3)]
    ok = not res.failures and all(s is not None for s in stars) and stars[0] < stars[1] < stars[2]
    report(6, "semiclassical BH N*(U) exists and increases", ok,
           f"N*(U=1,2,4) = {stars}; failures={len(res.failures)}")
    assert ok


# --- 7 ---------------------------------------------------------------------------

def transition_point(x, eta, level=0.5):
    """Interaction value of the last upward crossing of ``level`` (log-interpolated)."""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    below = np.nonzero(eta < level)[0]
    if eta[-1] < level or len(below) == 0:
        return None
    k = below[-1]
    f = (level - eta[k]) / (eta[k + 1] - eta[k])
    return float(np.exp(np.log(x[k]) + f * (np.log(x[k + 1]) - np.log(x[k]))))


def compare_curves(x, eta_sc, eta_q):
    """Transition ratio and the largest |d eta| outside the factor-2 band around both transitions."""
    xs, xq = transition_point(x, eta_sc), transition_point(x, eta_q)
    if xs is None or xq is None:
        return xs, xq, math.inf, math.inf
    ratio = max(xs, xq) / min(xs, xq)
    lo, hi = min(xs, xq) / 2, 2 * max(xs, xq)
    away = (np.asarray(x) < lo) | (np.asarray(x) > hi)
    dev = float(np.max(np.abs(np.asarray(eta_sc) - np.asarray(eta_q))[away], initial=0.0))
    return xs, xq, ratio, dev


JC_GRID_N4 = (0.1, 0.3, 1.0, 2.0, 3.0, 4.5, 7.0, 10.0, 14.0, 20.0)
BH_GRID_N4 = tuple(np.geomspace(0.02, 5.0, 12).round(4).tolist())


def _eta_pair(model, conn, param, values):
    base = {"N": 4, "Np": 20, "t_max": 50, "samples": 5001, "connectivity": conn}
    sc, q = [], []
    for v in values:
        sc.append(run(build_config(dict(base, engine=f"semiclassical-{model}", **{param: v}))).summary.eta)
        q.append(run(build_config(dict(base, engine="quantum", model=model, **{param: v}))).summary.eta)
    return np.array(sc), np.array(q)


@pytest.mark.parametrize("model,conn", [
    ("jc", "all_to_all"),
    ("jc", {"type": "finite_range", "D": 1}),
    ("bh", "all_to_all"),
    ("bh", {"type": "finite_range", "D": 1}),
])
def test_criterion_07_semiclassical_vs_quantum(model, conn):
    param, grid = ("g", JC_GRID_N4) if model == "jc" else ("U", BH_GRID_N4)
    sc, q = _eta_pair(model, conn, param, grid)
    xs, xq, ratio, dev = compare_curves(grid, sc, q)
    ok = ratio <= 2.0 and dev <= 0.15
    label = "all-to-all" if conn == "all_to_all" else "nearest-neighbour"
    fmt = (lambda v: "none" if v is None else f"{v:.3g}")
    report(7, f"semiclassical vs quantum, {model.upper()} N=4 Np=20 {label}", ok,
           f"transition {param}_sc={fmt(xs)} {param}_q={fmt(xq)} ratio={ratio:.2f} (<= 2); "
           f"max |d eta| away from transition={dev:.3f} (<= 0.15); "
           + " ".join(f"{v:g}:{a:.2f}/{b:.2f}" for v, a, b in zip(grid, sc, q)))
    assert ok


# --- 8 ---------------------------------------------------------------------------

def test_criterion_08_lindblad_validity():
    spec = NetworkSpec(3, connectivity=AllToAll())
    rates = OpenSystemRates(kappa=0.01, gamma=0.01)
    cfg = IntegratorConfig(dt=0.02, t_max=200.0, sample_every=1)
    runs = {g: simulate_open(spec, JaynesCummings(1.0, 1.0, g), 5, rates, cfg) for g in (2.0, 40.0)}
    trace = max(r.meta["trace_drift"] for r in runs.values())
    herm = max(r.meta["hermiticity"] for r in runs.values())
    dim = runs[2.0].meta["dim"]

    kappa, Np = 0.05, 4
    decay = simulate_open(NetworkSpec(2, J=0.0), BoseHubbard(1.0, 0.0), Np, OpenSystemRates(kappa=kappa),
                          IntegratorConfig(dt=0.05, t_max=60.0, sample_every=10))
    slope = np.polyfit(decay.times, np.log(decay.n[0]), 1)[0]
    rate_err = abs(-slope - kappa) / kappa

    w2 = first_drop_time(runs[2.0].times, runs[2.0].Z, 0.8)
    w40 = first_drop_time(runs[40.0].times, runs[40.0].Z, 0.8)
    ok = trace < 1e-8 and herm < 1e-10 and rate_err < 0.01 and w40 >= 10 * w2
    report(8, "Lindblad JC N=3 Np=5 kappa=gamma=0.01 over t=200", ok,
           f"dim={dim}; trace drift {trace:.1e} (< 1e-8); hermiticity {herm:.1e} (< 1e-10); "
           f"decay rate {-slope:.6f} vs {kappa} (rel err {rate_err:.1e}, < 1%); "
           f"Z > 0.8 until t={w2:.2f} (g=2) and t={w40:.2f} (g=40), ratio {w40 / w2:.0f} (>= 10)")
    assert ok


# --- 9 ---------------------------------------------------------------------------

def _disorder_curves(model, param, values, R, seed=2024):
    base = {"engine": "quantum", "model": model, "N": 5, "Np": 10, "t_max": 50, "samples": 5001}
    axes = [{"name": param, "values": list(values)}]
    clean = run_sweep(plan_from_dict({"base": base, "axes": axes}))
    dis = run_sweep(plan_from_dict({
        "base": dict(base, disorder={"delta_omega": 0.01, "delta_J": 0.01}),
        "axes": axes, "ensemble": R, "seed": seed,
    }))
    zero = run_sweep(plan_from_dict({
        "base": dict(base, disorder={"delta_omega": 0.0, "delta_J": 0.0}),
        "axes": axes, "ensemble": R, "seed": seed,
    }))
    return clean, dis, zero


def test_criterion_09_disorder_robustness():
    jc = _disorder_curves("jc", "g", (0.1, 1.0, 5.0, 20.0), R=4)
    bh = _disorder_curves("bh", "U", (0.1, 0.3, 1.0, 3.0, 10.0), R=10)
    dev_jc = float(np.max(np.abs(jc[1].eta - jc[0].eta)))
    dev_bh = float(np.max(np.abs(bh[1].eta - bh[0].eta)))
    bitwise = all(np.array_equal(c.eta, z.eta) for c, _, z in (jc, bh))

    # also bitwise at the trajectory level
    cfg = {"engine": "quantum", "model": "bh", "N": 5, "Np": 10, "U": 1.0, "t_max": 10, "samples": 501}
    a = run(build_config(cfg)).trajectory
    b = run(build_config(dict(cfg, disorder={"delta_omega": 0.0, "delta_J": 0.0}))).trajectory
    bitwise = bitwise and np.array_equal(a.n, b.n)
    failures = len(jc[1].failures) + len(bh[1].failures)
    ok = dev_jc < 0.1 and dev_bh < 0.1 and bitwise and failures == 0
    pts = lambda cur, vals: " ".join(f"{v:g}:{a:.3f}/{b:.3f}" for v, a, b in zip(vals, cur[0].eta, cur[1].eta))
    report(9, "disorder d_omega = d_J = 0.01: ensemble mean tracks the clean curve", ok,
           f"JC (R=4) max|d eta|={dev_jc:.4f}, BH (R=10) max|d eta|={dev_bh:.4f} (< 0.1); "
           f"delta=0 bitwise equal to clean: {bitwise}; clean/mean JC g {pts(jc, (0.1, 1.0, 5.0, 20.0))}; "
           f"BH U {pts(bh, (0.1, 0.3, 1.0, 3.0, 10.0))}")
    assert ok


# --- 10 --------------------------------------------------------------------------

DETERMINISM_RUNS = {
    "semiclassical-jc": ["--engine", "semiclassical-jc", "--N", "6", "--Np", "8", "--g", "2", "--D", "2",
                         "--delta-omega", "0.05", "--delta-J", "0.05", "--seed", "17", "--t-max", "10"],
    "semiclassical-bh": ["--engine", "semiclassical-bh", "--N", "7", "--Np", "10", "--U", "1.5",
                         "--delta-omega", "0.05", "--seed", "3", "--t-max", "10"],
    "lindblad": ["--engine", "lindblad", "--model", "jc", "--N", "2", "--Np", "2", "--g", "1", "--kappa", "0.05",
                 "--gamma", "0.02", "--gamma-phi", "0.01", "--delta-J", "0.1", "--seed", "5", "--t-max", "5"],
    "harmonic": ["--engine", "harmonic", "--N", "9", "--D", "2", "--delta-omega", "0.1", "--seed", "9"],
}


def test_criterion_10_determinism(tmp_path, capsys):
    same = {}
    for name, args in DETERMINISM_RUNS.items():
        blobs = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}"
            assert cli_main(["run", *args, "--out", str(out)]) == 0
            blobs.append((out / "trajectory.csv").read_bytes())
        same[name] = blobs[0] == blobs[1]
    capsys.readouterr()
    ok = all(same.values())
    report(10, "byte-identical trajectory CSV across repeated runs", ok,
           ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
