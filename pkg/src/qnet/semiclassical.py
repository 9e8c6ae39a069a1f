"""Mean-field dynamics of Jaynes-Cummings and Bose-Hubbard networks.

Amplitudes: alpha_i = <a_i>, beta_i = <sigma_i^->, w_i = <sigma_i^z>.  All
hopping (range, disorder, on-site shifts) enters through the single-particle
matrix ``h`` from :mod:`qnet.network`, so

    d alpha/dt = -i h alpha - i g beta              (JC)
    d beta/dt  = -i omega_q beta + i g alpha w
    d w/dt     = 2 i g (alpha^* beta - alpha beta^*)

    d alpha/dt = -i h alpha + i U |alpha|^2 alpha   (BH)

Engines integrate in the frame rotating at the cavity frequency omega_c.
This only multiplies alpha and beta by a common phase, so occupations,
sigma^z and the imbalance are unaffected while the step size no longer has
to resolve omega_c.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np
from scipy.integrate import solve_ivp

from .diagnostics import Trajectory
from .models import BoseHubbard, JaynesCummings

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"  # "rk4" (fixed step) or "rk45" (adaptive)
    dt: float = 1e-3
    t_max: float = 50.0
    sample_every: int = 10
    rtol: float = 1e-9
    atol: float = 1e-12

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"integrator.method must be 'rk4' or 'rk45', got {self.method!r}")
        if not self.dt > 0:
            raise ValueError("integrator.dt must be > 0")
        if not self.t_max > 0:
            raise ValueError("integrator.t_max must be > 0")
        if self.sample_every < 1:
            raise ValueError("integrator.sample_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))

    @property
    def times(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.sample_every)
        return steps * self.dt


@dataclass
class SemiclassicalStateJC:
    alpha: np.ndarray
    beta: np.ndarray
    w: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta, self.w]).astype(complex)

    @classmethod
    def unpack(cls, y: np.ndarray) -> "SemiclassicalStateJC":
        N = len(y) // 3
        return cls(y[:N], y[N:2 * N], y[2 * N:].real)

    def charge(self) -> float:
        return float(np.sum(np.abs(self.alpha) ** 2) + np.sum(self.w + 1) / 2)

    def bloch_excess(self) -> float:
        """Largest violation of |w| <= 1 or |beta|^2 <= (1 - w^2)/4."""
        w = np.real(self.w)
        return float(max(np.max(np.abs(w) - 1), np.max(np.abs(self.beta) ** 2 - (1 - w**2) / 4)))


@dataclass
class SemiclassicalStateBH:
    alpha: np.ndarray

    def pack(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=complex)

    @classmethod
    def unpack(cls, y: np.ndarray) -> "SemiclassicalStateBH":
        return cls(y)

    def charge(self) -> float:
        return float(np.sum(np.abs(self.alpha) ** 2))


def initial_jc(N: int, Np: float, test_site: int = 0) -> SemiclassicalStateJC:
    alpha = np.zeros(N, dtype=complex)
    alpha[test_site] = math.sqrt(Np)
    return SemiclassicalStateJC(alpha, np.zeros(N, dtype=complex), -np.ones(N))


def initial_bh(N: int, Np: float, test_site: int = 0) -> SemiclassicalStateBH:
    alpha = np.zeros(N, dtype=complex)
    alpha[test_site] = math.sqrt(Np)
    return SemiclassicalStateBH(alpha)


def rhs_jc(state: SemiclassicalStateJC, h: np.ndarray, omega_q: float, g: float) -> SemiclassicalStateJC:
    a, b, w = state.alpha, state.beta, state.w
    da = -1j * (h @ a) - 1j * g * b
    db = -1j * omega_q * b + 1j * g * a * w
    dw = 2j * g * (np.conj(a) * b - a * np.conj(b))
    return SemiclassicalStateJC(da, db, dw)


def rhs_bh(state: SemiclassicalStateBH, h: np.ndarray, U: float) -> SemiclassicalStateBH:
    a = state.alpha
    return SemiclassicalStateBH(-1j * (h @ a) + 1j * U * np.abs(a) ** 2 * a)


def packed_rhs_jc(h: np.ndarray, omega_q: float, g: float) -> Callable:
    def f(t, y):
        return rhs_jc(SemiclassicalStateJC.unpack(y), h, omega_q, g).pack()
    return f


def packed_rhs_bh(h: np.ndarray, U: float) -> Callable:
    def f(t, y):
        return rhs_bh(SemiclassicalStateBH(y), h, U).pack()
    return f


def integrate(rhs: Callable, y0, cfg: IntegratorConfig, *, n_sites: int | None = None,
              conserved: Callable | None = None) -> Trajectory:
    """Integrate dy/dt = rhs(t, y) and sample occupations on ``cfg.times``.

    ``y`` starts with the ``n_sites`` cavity amplitudes; a packed JC state
    (length 3 * n_sites) additionally yields sigma^z samples.  If
    ``conserved`` is given, its relative drift is stored in ``meta``.
    """
    y0 = np.asarray(y0, dtype=complex)
    if not np.all(np.isfinite(y0)):
        raise IntegrationError("initial state is not finite")
    if n_sites is None:
        n_sites = len(y0)
    times = cfg.times
    ys = np.empty((len(times), len(y0)), dtype=complex)
    if cfg.method == "rk4":
        dt = cfg.dt
        y = y0.copy()
        ys[0] = y
        k = 1
        for step in range(1, cfg.n_steps + 1):
            t = (step - 1) * dt
            k1 = rhs(t, y)
            k2 = rhs(t + dt / 2, y + dt / 2 * k1)
            k3 = rhs(t + dt / 2, y + dt / 2 * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if step % cfg.sample_every == 0:
                if not np.all(np.isfinite(y)):
                    raise IntegrationError(f"non-finite state at t={step * dt:.6g}")
                ys[k] = y
                k += 1
    else:
        sol = solve_ivp(rhs, (0.0, times[-1]), y0, method="RK45", t_eval=times,
                        rtol=cfg.rtol, atol=cfg.atol)
        if not sol.success:
            raise IntegrationError(f"adaptive integration failed: {sol.message}")
        ys = sol.y.T
        if not np.all(np.isfinite(ys)):
            raise IntegrationError("non-finite state in adaptive integration")
    n = np.abs(ys[:, :n_sites].T) ** 2
    sz = ys[:, 2 * n_sites:].real.T if len(y0) == 3 * n_sites else None
    meta = {"integrator": cfg.method, "dt": cfg.dt}
    if conserved is not None:
        q = np.array([conserved(y) for y in ys])
        meta["conserved_drift"] = float(np.max(np.abs(q - q[0])) / max(abs(q[0]), 1e-300))
    return Trajectory(times=times, n=n, sz=sz, meta=meta)


# --- compiled fixed-step kernels -------------------------------------------------

def _csr(h: np.ndarray):
    h = np.asarray(h, dtype=complex)
    rows, cols = np.nonzero(h)
    indptr = np.zeros(h.shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return indptr, cols.astype(np.int64), h[rows, cols]


@numba.njit(cache=True, nogil=True)
def _matvec(indptr, indices, data, x, out):
    for i in range(len(indptr) - 1):
        acc = 0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


@numba.njit(cache=True, nogil=True)
def _deriv_bh(indptr, indices, data, U, a, out):
    _matvec(indptr, indices, data, a, out)
    for i in range(len(a)):
        ai = a[i]
        out[i] = -1j * out[i] + 1j * U * (ai.real * ai.real + ai.imag * ai.imag) * ai


@numba.njit(cache=True, nogil=True)
def _rk4_bh(indptr, indices, data, U, a0, dt, n_steps, sample_every):
    N = len(a0)
    T = n_steps // sample_every + 1
    n_out = np.empty((N, T))
    norm = np.empty(T)
    a = a0.copy()
    k1 = np.empty(N, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    s = 0
    for step in range(n_steps + 1):
        if step > 0:
            _deriv_bh(indptr, indices, data, U, a, k1)
            for i in range(N):
                tmp[i] = a[i] + 0.5 * dt * k1[i]
            _deriv_bh(indptr, indices, data, U, tmp, k2)
            for i in range(N):
                tmp[i] = a[i] + 0.5 * dt * k2[i]
            _deriv_bh(indptr, indices, data, U, tmp, k3)
            for i in range(N):
                tmp[i] = a[i] + dt * k3[i]
            _deriv_bh(indptr, indices, data, U, tmp, k4)
            for i in range(N):
                a[i] = a[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if step % sample_every == 0:
            tot = 0.0
            for i in range(N):
                v = a[i].real * a[i].real + a[i].imag * a[i].imag
                n_out[i, s] = v
                tot += v
            norm[s] = tot
            s += 1
            if not np.isfinite(tot):
                return n_out[:, :s], norm[:s], False
    return n_out, norm, True


@numba.njit(cache=True, nogil=True)
def _deriv_jc(indptr, indices, data, dq, g, a, b, w, da, db, dw):
    _matvec(indptr, indices, data, a, da)
    for i in range(len(a)):
        da[i] = -1j * da[i] - 1j * g * b[i]
        db[i] = -1j * dq * b[i] + 1j * g * a[i] * w[i]
        z = a[i].conjugate() * b[i]
        dw[i] = -4.0 * g * z.imag


@numba.njit(cache=True, nogil=True)
def _rk4_jc(indptr, indices, data, dq, g, a0, b0, w0, dt, n_steps, sample_every):
    N = len(a0)
    T = n_steps // sample_every + 1
    n_out = np.empty((N, T))
    sz_out = np.empty((N, T))
    charge = np.empty(T)
    bloch = 0.0
    a = a0.copy()
    b = b0.copy()
    w = w0.copy()
    ka = np.empty((4, N), dtype=np.complex128)
    kb = np.empty((4, N), dtype=np.complex128)
    kw = np.empty((4, N))
    ta = np.empty(N, dtype=np.complex128)
    tb = np.empty(N, dtype=np.complex128)
    tw = np.empty(N)
    s = 0
    for step in range(n_steps + 1):
        if step > 0:
            _deriv_jc(indptr, indices, data, dq, g, a, b, w, ka[0], kb[0], kw[0])
            for st in range(1, 4):
                c = 0.5 * dt if st < 3 else dt
                for i in range(N):
                    ta[i] = a[i] + c * ka[st - 1, i]
                    tb[i] = b[i] + c * kb[st - 1, i]
                    tw[i] = w[i] + c * kw[st - 1, i]
                _deriv_jc(indptr, indices, data, dq, g, ta, tb, tw, ka[st], kb[st], kw[st])
            for i in range(N):
                a[i] = a[i] + dt / 6.0 * (ka[0, i] + 2.0 * ka[1, i] + 2.0 * ka[2, i] + ka[3, i])
                b[i] = b[i] + dt / 6.0 * (kb[0, i] + 2.0 * kb[1, i] + 2.0 * kb[2, i] + kb[3, i])
                w[i] = w[i] + dt / 6.0 * (kw[0, i] + 2.0 * kw[1, i] + 2.0 * kw[2, i] + kw[3, i])
        if step % sample_every == 0:
            tot = 0.0
            for i in range(N):
                v = a[i].real * a[i].real + a[i].imag * a[i].imag
                n_out[i, s] = v
                sz_out[i, s] = w[i]
                tot += v + 0.5 * (w[i] + 1.0)
                bb = b[i].real * b[i].real + b[i].imag * b[i].imag
                bloch = max(bloch, abs(w[i]) - 1.0, bb - 0.25 * (1.0 - w[i] * w[i]))
            charge[s] = tot
            s += 1
            if not np.isfinite(tot):
                return n_out[:, :s], sz_out[:, :s], charge[:s], bloch, False
    return n_out, sz_out, charge, bloch, True


def _rel_drift(q: np.ndarray) -> float:
    return float(np.max(np.abs(q - q[0])) / max(abs(q[0]), 1e-300))


def rotating_frame(h: np.ndarray, omega_ref: float) -> np.ndarray:
    return h - omega_ref * np.eye(h.shape[0])


def simulate_bh(h: np.ndarray, model: BoseHubbard, Np: float, cfg: IntegratorConfig,
                test_site: int = 0) -> Trajectory:
    """Mean-field BH trajectory from Np bosons in ``test_site``."""
    N = h.shape[0]
    hr = rotating_frame(h, model.omega_c)
    y0 = initial_bh(N, Np, test_site).pack()
    if cfg.method == "rk4":
        n, norm, ok = _rk4_bh(*_csr(hr), float(model.U), y0, cfg.dt, cfg.n_steps, cfg.sample_every)
        if not ok:
            raise IntegrationError(f"non-finite BH state after t={(n.shape[1] - 1) * cfg.dt * cfg.sample_every:.6g}")
        traj = Trajectory(times=cfg.times, n=n, meta={"integrator": "rk4", "dt": cfg.dt})
        traj.meta["conserved_drift"] = _rel_drift(norm)
    else:
        traj = integrate(packed_rhs_bh(hr, model.U), y0, cfg, n_sites=N,
                         conserved=lambda y: np.sum(np.abs(y) ** 2))
    traj.meta["engine"] = "semiclassical-bh"
    return traj


def simulate_jc(h: np.ndarray, model: JaynesCummings, Np: float, cfg: IntegratorConfig,
                test_site: int = 0) -> Trajectory:
    """Mean-field JC trajectory from Np photons in ``test_site``, qubits down."""
    N = h.shape[0]
    hr = rotating_frame(h, model.omega_c)
    dq = model.omega_q - model.omega_c
    st = initial_jc(N, Np, test_site)
    if cfg.method == "rk4":
        n, sz, q, bloch, ok = _rk4_jc(*_csr(hr), float(dq), float(model.g), st.alpha.copy(),
                                      st.beta.copy(), st.w.astype(float), cfg.dt, cfg.n_steps,
                                      cfg.sample_every)
        if not ok:
            raise IntegrationError("non-finite JC state")
        traj = Trajectory(times=cfg.times, n=n, sz=sz, meta={"integrator": "rk4", "dt": cfg.dt})
        traj.meta["conserved_drift"] = _rel_drift(q)
        traj.meta["bloch_excess"] = float(bloch)
        if bloch > 1e-6:
            log.warning("Bloch-sphere bound exceeded by %.3g; consider a smaller dt", bloch)
    else:
        traj = integrate(packed_rhs_jc(hr, dq, model.g), st.pack(), cfg, n_sites=N,
                         conserved=lambda y: SemiclassicalStateJC.unpack(y).charge())
    traj.meta["engine"] = "semiclassical-jc"
    return traj
