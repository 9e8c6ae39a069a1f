"""Local Lindblad dynamics of JC and BH networks at zero temperature.

    d rho/dt = -i[H, rho] + kappa sum_j L[a_j] + gamma sum_j L[sigma_j^-]
               + gamma_phi sum_j L[sigma_j^z]

    L[A] = (2 A rho A^dag - A^dag A rho - rho A^dag A) / 2

Without a drive the total excitation number can only decrease, so the state
lives on the truncated space with at most Np excitations.  H conserves the
excitation number and every jump either keeps it (sigma^z) or lowers it by
one (a, sigma^-), so a density matrix that starts block-diagonal in the
excitation number stays block-diagonal.  The default integrator exploits
this: it is a fourth-order Runge-Kutta scheme in the interaction picture of
H (Lawson RK4), with the unitary part applied exactly per block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .diagnostics import Trajectory, z_ratio
from .models import JaynesCummings, UnitModel
from .network import DisorderRealization, NetworkSpec
from .quantum import (
    BasisIndex,
    DimensionError,
    SparseHamiltonian,
    annihilator,
    assemble_hamiltonian,
    build_basis,
    initial_fock_state,
    qubit_lowering,
)
from .semiclassical import IntegrationError, IntegratorConfig

log = logging.getLogger(__name__)

DEFAULT_SIDE_CAP = 2000


@dataclass(frozen=True)
class OpenSystemRates:
    kappa: float = 0.0
    gamma: float = 0.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "gamma", "gamma_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"rates.{name} must be >= 0")

    @property
    def is_closed(self) -> bool:
        return self.kappa == 0 and self.gamma == 0 and self.gamma_phi == 0

    def for_basis(self, basis: BasisIndex) -> "OpenSystemRates":
        """Qubit rates are meaningless without qubits and are dropped."""
        if basis.s is None and (self.gamma or self.gamma_phi):
            log.warning("dropping qubit rates gamma/gamma_phi for a network without qubits")
            return OpenSystemRates(self.kappa, 0.0, 0.0)
        return self

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "gamma": self.gamma, "gamma_phi": self.gamma_phi}


@dataclass
class DensityMatrix:
    data: np.ndarray
    basis: BasisIndex

    @classmethod
    def pure(cls, psi: np.ndarray, basis: BasisIndex) -> "DensityMatrix":
        return cls(np.outer(psi, psi.conj()), basis)

    def trace(self) -> complex:
        return np.trace(self.data)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.data + self.data.conj().T) / 2).min())

    def purity(self) -> float:
        return float(np.real(np.vdot(self.data.T.conj(), self.data)))


def jump_operators(basis: BasisIndex, rates: OpenSystemRates):
    """(rate, A) pairs for every site; sigma^z jumps as dense diagonals."""
    rates = rates.for_basis(basis)
    ops = []
    for j in range(basis.N):
        if rates.kappa:
            ops.append((rates.kappa, annihilator(basis, j)))
        if rates.gamma:
            ops.append((rates.gamma, qubit_lowering(basis, j)))
        if rates.gamma_phi:
            ops.append((rates.gamma_phi, sp.diags((2 * basis.s[:, j] - 1).astype(float)).tocsr()))
    return ops


def lindblad_rhs(rho, H: SparseHamiltonian, rates: OpenSystemRates, ops=None) -> np.ndarray:
    """d rho/dt for a full density matrix (array or DensityMatrix)."""
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if data.shape != (H.dim, H.dim):
        raise ValueError(f"density matrix shape {data.shape} does not match H of dimension {H.dim}")
    if ops is None:
        ops = jump_operators(H.basis, rates)
    Hm = H.matrix
    out = -1j * (Hm @ data - (Hm.T @ data.T).T)
    for c, A in ops:
        Ad = A.getH()
        AdA = Ad @ A
        Ar = A @ data
        out += c * ((Ad.T @ Ar.T).T - 0.5 * (AdA @ data) - 0.5 * (AdA.T @ data.T).T)
    return out


class _BlockModel:
    """Excitation-number blocks of H, the jump operators and the decay weights."""

    def __init__(self, H: SparseHamiltonian, rates: OpenSystemRates):
        basis = H.basis
        rates = rates.for_basis(basis)
        exc = basis.excitations
        self.levels = np.unique(exc)
        self.idx = {int(M): np.nonzero(exc == M)[0] for M in self.levels}
        Hm = H.matrix.tocsr()
        self.H = {}
        for M, ix in self.idx.items():
            self.H[M] = Hm[ix][:, ix].toarray()
        coo = Hm.tocoo()
        cross = (exc[coo.row] != exc[coo.col]) & (coo.data != 0)
        if np.any(cross):
            raise ValueError("Hamiltonian does not conserve the excitation number")
        self.eig = {M: np.linalg.eigh(Hb) for M, Hb in self.H.items()}
        # decay weights: -(g_a + g_b)/2 from anticommutators; dephasing acts elementwise too
        g = np.zeros(basis.dim)
        if rates.kappa:
            g += rates.kappa * basis.n.sum(axis=1)
        if rates.gamma:
            g += rates.gamma * basis.s.sum(axis=1)
        self.W = {}
        for M, ix in self.idx.items():
            w = -0.5 * (g[ix][:, None] + g[ix][None, :])
            if rates.gamma_phi:
                z = 2 * basis.s[ix] - 1
                w += rates.gamma_phi * (z @ z.T - basis.N)
            self.W[M] = w
        # lowering jumps: block M+1 -> M
        self.jumps = {M: [] for M in self.idx}
        for j in range(basis.N):
            lowering = []
            if rates.kappa:
                lowering.append((rates.kappa, annihilator(basis, j)))
            if rates.gamma:
                lowering.append((rates.gamma, qubit_lowering(basis, j)))
            for c, A in lowering:
                for M in self.idx:
                    if M + 1 in self.idx:
                        blk = A[self.idx[M]][:, self.idx[M + 1]].tocoo()
                        if blk.nnz:
                            self.jumps[M].append(_gather_jump(c, blk))

    def propagator(self, tau: float):
        out = {}
        for M, (E, V) in self.eig.items():
            out[M] = (V * np.exp(-1j * E * tau)) @ V.conj().T
        return out

    def dissipator(self, rho: dict) -> dict:
        out = {}
        for M, r in rho.items():
            d = self.W[M] * r
            if self.jumps[M]:
                up = rho[M + 1]
                for rows, cols, w in self.jumps[M]:
                    d[rows] += w * up[cols]
            out[M] = d
        return out


def _gather_jump(c: float, blk: sp.coo_matrix):
    """c A r A^dag for a lowering block with at most one entry per row and column.

    Then (A r A^dag)[i, i'] = v_i v_i' r[j_i, j_i'], a pure gather.
    """
    if len(np.unique(blk.row)) != blk.nnz or len(np.unique(blk.col)) != blk.nnz:
        raise ValueError("jump operator is not a weighted partial permutation")
    rows = np.ix_(blk.row, blk.row)
    cols = np.ix_(blk.col, blk.col)
    return rows, cols, c * np.outer(blk.data, blk.data)


def _herm_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _conj(U: dict, rho: dict) -> dict:
    return {M: U[M] @ r @ U[M].conj().T for M, r in rho.items()}


def _axpy(a: dict, c: float, b: dict) -> dict:
    return {M: a[M] + c * b[M] for M in a}


def evolve_open(H: SparseHamiltonian, rho0, rates: OpenSystemRates, times=None,
                cfg: IntegratorConfig | None = None, *, method: str = "lawson",
                z_floor: float = 1e-6, trace_tol: float = 1e-6,
                side_cap: int = DEFAULT_SIDE_CAP, psd_checks: int = 50) -> Trajectory:
    """Integrate the master equation and record n_j(t), P(t), Z(t) (and sigma^z).

    The step is ``cfg.dt``; samples are taken every ``cfg.sample_every``
    steps up to ``cfg.t_max`` (``times`` may be given instead and must lie
    on that step grid).  ``method`` is "lawson" (block interaction-picture
    RK4, default) or "rk4" (plain RK4 on the full matrix).
    """
    cfg = cfg or IntegratorConfig(dt=0.02, t_max=200.0, sample_every=5)
    basis = H.basis
    if basis.dim > side_cap:
        raise DimensionError(f"density matrix side {basis.dim} exceeds cap {side_cap}")
    data = rho0.data if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if data.shape != (basis.dim, basis.dim):
        raise ValueError("rho0 does not match the Hamiltonian dimension")
    if abs(np.trace(data) - 1) > 1e-8:
        raise ValueError("rho0 must have unit trace")
    dt = cfg.dt
    n_steps = cfg.n_steps
    if times is None:
        sample_steps = np.arange(0, n_steps + 1, cfg.sample_every)
    else:
        sample_steps = np.rint(np.asarray(times, dtype=float) / dt).astype(int)
        if np.any(np.abs(sample_steps * dt - np.asarray(times)) > 1e-9 * max(1.0, float(np.max(times)))):
            raise ValueError("sample times must be multiples of the step dt")
        n_steps = int(sample_steps[-1])
    times = sample_steps * dt
    T = len(times)
    n_out = np.empty((basis.N, T))
    sz_out = np.empty((basis.N, T)) if basis.s is not None else None
    exc_out = np.empty(T)
    diag_stats = {"trace_drift": 0.0, "hermiticity": 0.0, "min_eigenvalue": 0.0}
    psd_at = set(np.unique(np.linspace(0, T - 1, min(T, psd_checks)).astype(int)).tolist())
    exc = basis.excitations

    def record(k, diag, blocks=None, full=None):
        n_out[:, k] = diag @ basis.n
        if sz_out is not None:
            sz_out[:, k] = diag @ (2 * basis.s - 1)
        exc_out[k] = diag @ exc
        tr = diag.sum()
        diag_stats["trace_drift"] = max(diag_stats["trace_drift"], float(abs(tr - 1)))
        if abs(tr - 1) > trace_tol:
            raise IntegrationError(f"trace drifted to {tr:.12g} at t={times[k]:.6g}")
        if k in psd_at:
            mats = blocks.values() if blocks is not None else [full]
            for m in mats:
                ev = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
                diag_stats["min_eigenvalue"] = min(diag_stats["min_eigenvalue"], float(ev))

    if method == "lawson":
        model = _BlockModel(H, rates)
        idx = model.idx
        off = data.copy()
        for ix in idx.values():
            off[np.ix_(ix, ix)] = 0
        if np.max(np.abs(off), initial=0.0) > 1e-14:
            raise ValueError("rho0 has coherences between excitation sectors; use method='rk4'")
        rho = {M: data[np.ix_(ix, ix)].copy() for M, ix in idx.items()}
        Uh = model.propagator(dt / 2)
        D = model.dissipator

        def full_diag(r):
            d = np.empty(basis.dim)
            for M, ix in idx.items():
                d[ix] = np.diagonal(r[M]).real
            return d

        k = 0
        if sample_steps[0] == 0:
            record(0, full_diag(rho), blocks=rho)
            k = 1
        for step in range(1, n_steps + 1):
            k1 = D(rho)
            yh = _conj(Uh, rho)
            Ek1 = _conj(Uh, k1)
            k2 = D(_axpy(yh, dt / 2, Ek1))
            k3 = D(_axpy(yh, dt / 2, k2))
            k4 = D(_conj(Uh, _axpy(yh, dt, k3)))
            inner = {M: yh[M] + dt / 6 * Ek1[M] + dt / 3 * (k2[M] + k3[M]) for M in rho}
            rho = _axpy(_conj(Uh, inner), dt / 6, k4)
            if k < T and step == sample_steps[k]:
                # measured before the projection back onto Hermitian matrices
                herm = max(_herm_error(r) for r in rho.values())
                diag_stats["hermiticity"] = max(diag_stats["hermiticity"], herm)
            rho = {M: 0.5 * (r + r.conj().T) for M, r in rho.items()}
            if k < T and step == sample_steps[k]:
                if not all(np.all(np.isfinite(r)) for r in rho.values()):
                    raise IntegrationError(f"non-finite density matrix at t={step * dt:.6g}")
                record(k, full_diag(rho), blocks=rho)
                k += 1
    elif method == "rk4":
        ops = jump_operators(basis, rates)
        rho = data.copy()
        k = 0
        if sample_steps[0] == 0:
            record(0, np.diagonal(rho).real.copy(), full=rho)
            k = 1
        for step in range(1, n_steps + 1):
            f = lambda r: lindblad_rhs(r, H, rates, ops)  # noqa: E731
            k1 = f(rho)
            k2 = f(rho + dt / 2 * k1)
            k3 = f(rho + dt / 2 * k2)
            k4 = f(rho + dt * k3)
            rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if k < T and step == sample_steps[k]:
                diag_stats["hermiticity"] = max(diag_stats["hermiticity"], _herm_error(rho))
            rho = 0.5 * (rho + rho.conj().T)
            if k < T and step == sample_steps[k]:
                if not np.all(np.isfinite(rho)):
                    raise IntegrationError(f"non-finite density matrix at t={step * dt:.6g}")
                record(k, np.diagonal(rho).real.copy(), full=rho)
                k += 1
    else:
        raise ValueError(f"unknown method {method!r}")

    meta = {"integrator": method, "dt": dt, "dim": basis.dim, "rates": rates.to_dict(), "z_floor": z_floor}
    meta.update(diag_stats)
    meta["excitation_max_increase"] = float(np.max(np.diff(exc_out), initial=0.0))
    traj = Trajectory(times=times, n=n_out, sz=sz_out, Z=z_ratio(n_out, z_floor), meta=meta)
    return traj


def simulate_open(spec: NetworkSpec, model: UnitModel, Np: int, rates: OpenSystemRates,
                  cfg: IntegratorConfig | None = None, *,
                  realization: DisorderRealization | None = None, test_site: int = 0,
                  **kw) -> Trajectory:
    """Standard initial Fock state evolved under the master equation."""
    kind = "jc" if isinstance(model, JaynesCummings) else "boson"
    basis = build_basis(spec.N, Np, kind, max_excitations=Np)
    H = assemble_hamiltonian(spec, model, basis, realization)
    psi0 = initial_fock_state(basis, test_site, Np)
    traj = evolve_open(H, DensityMatrix.pure(psi0, basis), rates, cfg=cfg, **kw)
    traj.meta["engine"] = "lindblad"
    return traj
