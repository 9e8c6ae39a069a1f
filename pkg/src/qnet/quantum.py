"""Exact closed-system evolution of JC and BH networks on a truncated Fock basis.

Each unit carries a cavity occupation n_i in 0..Np and, for JC, a qubit bit
s_i (0 = ground).  The basis may be restricted to a fixed total excitation
M = sum(n_i + s_i), which closed dynamics conserve.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .diagnostics import Trajectory
from .models import BoseHubbard, JaynesCummings, UnitModel
from .network import DisorderRealization, NetworkSpec, single_particle_hamiltonian

log = logging.getLogger(__name__)

DEFAULT_DIM_CAP = 2_000_000


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BasisIndex:
    """Enumerated product states with sorted mixed-radix keys for lookup."""

    N: int
    Np: int
    kind: str  # "jc" or "boson"
    M: int | None
    n: np.ndarray  # (dim, N) cavity occupations
    s: np.ndarray | None  # (dim, N) qubit bits, JC only
    keys: np.ndarray
    max_excitations: int | None = None

    @property
    def dim(self) -> int:
        return len(self.keys)

    @property
    def local_dim(self) -> int:
        return 2 * (self.Np + 1) if self.kind == "jc" else self.Np + 1

    def encode(self, n: np.ndarray, s: np.ndarray | None = None) -> np.ndarray:
        loc = np.asarray(n, dtype=np.int64)
        if self.kind == "jc":
            loc = 2 * loc + np.asarray(s, dtype=np.int64)
        radix = self.local_dim ** np.arange(self.N - 1, -1, -1, dtype=np.int64)
        return loc @ radix

    def lookup(self, keys) -> np.ndarray:
        """Positions of ``keys`` in the basis, -1 where absent."""
        keys = np.asarray(keys, dtype=np.int64)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, self.dim - 1)
        return np.where(self.keys[pos] == keys, pos, -1)

    def index(self, n, s=None) -> int:
        pos = int(self.lookup(self.encode(np.atleast_2d(n), None if s is None else np.atleast_2d(s)))[0])
        if pos < 0:
            raise KeyError(f"state n={list(n)} s={s} is outside the basis")
        return pos

    @property
    def excitations(self) -> np.ndarray:
        tot = self.n.sum(axis=1)
        if self.s is not None:
            tot = tot + self.s.sum(axis=1)
        return tot


def full_dimension(N: int, Np: int, kind: str) -> int:
    d = 2 * (Np + 1) if kind == "jc" else Np + 1
    return d**N


def sector_dimension(N: int, Np: int, kind: str, M: int) -> int:
    """Number of states with sum(n_i + s_i) = M and n_i <= Np (inclusion-exclusion)."""
    def bosons(sites, m):
        # occupations 0..Np on ``sites`` summing to m
        return sum((-1) ** r * comb(sites, r) * comb(m - r * (Np + 1) + sites - 1, sites - 1)
                   for r in range(sites + 1) if m - r * (Np + 1) >= 0)
    if kind == "jc":
        return sum(comb(N, q) * bosons(N, M - q) for q in range(min(N, M) + 1))
    return bosons(N, M)


def _model_kind(model) -> str:
    if isinstance(model, str):
        return "jc" if model in ("jc", "jaynes_cummings") else "boson"
    return "jc" if isinstance(model, JaynesCummings) else "boson"


def build_basis(N: int, Np: int, model_kind="boson", sector: int | None = None,
                cap: int = DEFAULT_DIM_CAP, max_excitations: int | None = None) -> BasisIndex:
    """Enumerate the truncated basis, optionally only the sector with M excitations.

    ``model_kind`` is "jc" or anything bosonic ("bh", "harmonic", a model
    instance).  ``max_excitations`` keeps every sector up to that total, which
    is all that undriven dissipative dynamics can reach.
    """
    kind = _model_kind(model_kind)
    if sector is not None and max_excitations is not None:
        raise ValueError("give either sector or max_excitations, not both")
    if sector is not None:
        size = sector_dimension(N, Np, kind, sector)
    elif max_excitations is not None:
        size = sum(sector_dimension(N, Np, kind, m) for m in range(max_excitations + 1))
    else:
        size = full_dimension(N, Np, kind)
    if size > cap:
        raise DimensionError(f"basis dimension {size} exceeds cap {cap} (N={N}, Np={Np}, kind={kind}, M={sector})")
    if size == 0:
        raise DimensionError(f"empty sector M={sector}")
    local_n = np.arange(Np + 1).repeat(2) if kind == "jc" else np.arange(Np + 1)
    local_s = np.tile([0, 1], Np + 1) if kind == "jc" else np.zeros(Np + 1, dtype=int)
    local_exc = local_n + local_s
    d = len(local_n)
    # grow partial states site by site; rows stay in key order
    loc = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1, dtype=np.int64)
    for site in range(N):
        rows = np.repeat(np.arange(len(loc)), d)
        new = np.tile(np.arange(d), len(loc))
        exc = used[rows] + local_exc[new]
        if sector is not None:
            keep = exc <= sector if site < N - 1 else exc == sector
            rows, new, exc = rows[keep], new[keep], exc[keep]
        elif max_excitations is not None:
            keep = exc <= max_excitations
            rows, new, exc = rows[keep], new[keep], exc[keep]
        loc = np.column_stack([loc[rows], new])
        used = exc
    n = local_n[loc]
    s = local_s[loc] if kind == "jc" else None
    radix = d ** np.arange(N - 1, -1, -1, dtype=np.int64)
    keys = loc @ radix
    assert np.all(np.diff(keys) > 0)
    return BasisIndex(N=N, Np=Np, kind=kind, M=sector, n=n, s=s, keys=keys, max_excitations=max_excitations)


@dataclass(eq=False)
class SparseHamiltonian:
    matrix: sp.csr_matrix
    basis: BasisIndex
    hermitian: bool = True

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.getH()
        return float(abs(diff).max()) if diff.nnz else 0.0

    def entries(self):
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data


def assemble_hamiltonian(spec: NetworkSpec, model: UnitModel, basis: BasisIndex,
                         realization: DisorderRealization | None = None) -> SparseHamiltonian:
    """Sparse many-body Hamiltonian sum_ij h_ij a_i^dag a_j + unit terms."""
    if (basis.kind == "jc") != isinstance(model, JaynesCummings):
        raise ValueError(f"basis kind {basis.kind!r} does not match model {type(model).__name__}")
    if basis.N != spec.N:
        raise ValueError("basis and network disagree on N")
    h = single_particle_hamiltonian(spec, model.omega_c, realization)
    n = basis.n
    nf = n.astype(float)
    diag = nf @ h.diagonal().real
    rows, cols, vals = [], [], []
    if isinstance(model, BoseHubbard):
        diag = diag - 0.5 * model.U * (nf**2).sum(axis=1)
    if isinstance(model, JaynesCummings):
        s = basis.s
        diag = diag + model.omega_q * s.sum(axis=1)
        for i in range(basis.N):
            # a_i sigma_i^+ : (n, 0) -> (n-1, 1)
            src = np.nonzero((n[:, i] > 0) & (s[:, i] == 0))[0]
            n2, s2 = n[src].copy(), s[src].copy()
            n2[:, i] -= 1
            s2[:, i] = 1
            dst = basis.lookup(basis.encode(n2, s2))
            ok = dst >= 0
            amp = model.g * np.sqrt(nf[src[ok], i])
            rows += [dst[ok], src[ok]]
            cols += [src[ok], dst[ok]]
            vals += [amp, amp]
    N = basis.N
    for i in range(N):
        for j in range(N):
            if i == j or h[i, j] == 0:
                continue
            # h_ij a_i^dag a_j
            src = np.nonzero((n[:, j] > 0) & (n[:, i] < basis.Np))[0]
            n2 = n[src].copy()
            n2[:, i] += 1
            n2[:, j] -= 1
            dst = basis.lookup(basis.encode(n2, None if basis.s is None else basis.s[src]))
            ok = dst >= 0
            amp = h[i, j] * np.sqrt((nf[src[ok], i] + 1) * nf[src[ok], j])
            rows.append(dst[ok])
            cols.append(src[ok])
            vals.append(amp)
    dim = basis.dim
    rows.append(np.arange(dim))
    cols.append(np.arange(dim))
    vals.append(diag)
    H = sp.csr_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    H.sum_duplicates()
    return SparseHamiltonian(H, basis)


def annihilator(basis: BasisIndex, site: int) -> sp.csr_matrix:
    """a_site restricted to the basis (matrix elements leaving it are dropped)."""
    src = np.nonzero(basis.n[:, site] > 0)[0]
    n2 = basis.n[src].copy()
    n2[:, site] -= 1
    dst = basis.lookup(basis.encode(n2, None if basis.s is None else basis.s[src]))
    ok = dst >= 0
    vals = np.sqrt(basis.n[src[ok], site].astype(float))
    return sp.csr_matrix((vals, (dst[ok], src[ok])), shape=(basis.dim, basis.dim))


def qubit_lowering(basis: BasisIndex, site: int) -> sp.csr_matrix:
    """sigma^-_site; requires a JC basis."""
    if basis.s is None:
        raise ValueError("basis has no qubits")
    src = np.nonzero(basis.s[:, site] == 1)[0]
    s2 = basis.s[src].copy()
    s2[:, site] = 0
    dst = basis.lookup(basis.encode(basis.n[src], s2))
    ok = dst >= 0
    return sp.csr_matrix((np.ones(ok.sum()), (dst[ok], src[ok])), shape=(basis.dim, basis.dim))


def initial_fock_state(basis: BasisIndex, test_site: int = 0, Np: int | None = None) -> np.ndarray:
    """|Np, 0, ..., 0> with every qubit in its ground state."""
    Np = basis.Np if Np is None else Np
    occ = np.zeros(basis.N, dtype=int)
    occ[test_site] = Np
    s = np.zeros(basis.N, dtype=int) if basis.kind == "jc" else None
    psi = np.zeros(basis.dim, dtype=complex)
    try:
        psi[basis.index(occ, s)] = 1.0
    except KeyError:
        raise ValueError(f"initial Fock state with {Np} quanta in unit {test_site} lies outside the basis") from None
    return psi


# --- observables -----------------------------------------------------------------

def occupations(basis: BasisIndex, psi: np.ndarray) -> np.ndarray:
    """<a_i^dag a_i> for a state vector (N,) or stack of states (T, dim) -> (N, T)."""
    prob = np.abs(np.atleast_2d(psi)) ** 2
    return (prob @ basis.n).T


def sigma_z(basis: BasisIndex, psi: np.ndarray) -> np.ndarray:
    prob = np.abs(np.atleast_2d(psi)) ** 2
    return (prob @ (2 * basis.s - 1)).T


# --- propagation -----------------------------------------------------------------

def _lanczos(matvec, v0, m):
    """Lanczos with full reorthogonalization.  Returns (V, alpha, beta, beta_last)."""
    dim = len(v0)
    V = np.empty((m, dim), dtype=complex)
    alpha = np.empty(m)
    beta = np.empty(m)
    V[0] = v0
    for j in range(m):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w -= alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        # full reorthogonalization; V^H w computed without copying V
        Vj = V[: j + 1]
        w -= (Vj @ w.conj()).conj() @ Vj
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-13 * max(1.0, abs(alpha[j])) or j == m - 1:
            return V[: j + 1], alpha[: j + 1], beta[:j], beta[j]
        V[j + 1] = w / beta[j]
    raise AssertionError("unreachable")


def krylov_propagate(H: sp.spmatrix, psi0: np.ndarray, times, *, krylov_dim: int = 40,
                     tol: float = 1e-12, callback=None):
    """exp(-iHt) psi0 at every sample time via adaptive short-time Lanczos steps.

    Each Krylov space is reused for all samples it covers.  The step length
    is the largest one whose a-posteriori residual estimate
    beta_m |e_m^T exp(-i T tau) e_1| stays below ``tol``.

    Without ``callback`` the (T, dim) array of states is returned.  Otherwise
    ``callback(idx, states)`` receives consecutive blocks of samples and
    nothing is stored.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be non-negative and sorted")
    out = None
    if callback is None:
        out = np.empty((len(times), len(psi0)), dtype=complex)

        def callback(idx, block):
            out[idx] = block

    matvec = H.dot
    psi = np.asarray(psi0, dtype=complex).copy()
    t_cur = 0.0
    k = int(np.searchsorted(times, t_cur, side="right"))
    if k:
        callback(np.arange(k), np.tile(psi, (k, 1)))
    tau_guess = None
    while k < len(times):
        nrm = np.linalg.norm(psi)
        V, a, b, b_last = _lanczos(matvec, psi / nrm, krylov_dim)
        theta, S = eigh_tridiagonal(a, b) if len(a) > 1 else (a.copy(), np.ones((1, 1)))
        c0 = S[0]  # S^T e_1
        remaining = times[-1] - t_cur
        breakdown = len(a) < krylov_dim

        def err(tau):
            return 0.0 if breakdown else b_last * abs(S[-1] @ (np.exp(-1j * theta * tau) * c0))

        if breakdown:
            tau = remaining
        else:
            tau = min(remaining, tau_guess or 1.0 / max(np.abs(theta).max(), 1e-12))
            while err(tau) > tol:
                tau *= 0.7
            while tau < remaining and err(min(remaining, tau * 1.25)) <= tol:
                tau = min(remaining, tau * 1.25)
        tau_guess = tau
        t_new = t_cur + tau
        k_end = int(np.searchsorted(times, t_new * (1 + 1e-15), side="right"))
        if k_end > k:
            dts = times[k:k_end] - t_cur
            coef = (np.exp(-1j * np.outer(dts, theta)) * c0) @ S.T  # (ns, m)
            callback(np.arange(k, k_end), nrm * (coef @ V))
            k = k_end
        psi = nrm * ((S @ (np.exp(-1j * theta * tau) * c0)) @ V)
        t_cur = t_new
    return out


def dense_propagate(H, psi0: np.ndarray, times) -> np.ndarray:
    """Reference propagation by full diagonalization (small dimensions only)."""
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    E, U = np.linalg.eigh(Hd)
    c = U.conj().T @ psi0
    ph = np.exp(-1j * np.outer(np.asarray(times, dtype=float), E))
    return (ph * c) @ U.T


def evolve(H: SparseHamiltonian, psi0: np.ndarray, times, *, method: str = "krylov",
           krylov_dim: int = 40, tol: float = 1e-12, energy_samples: int = 64) -> Trajectory:
    """Evolve psi0 under H and record n_i(t), P(t) and (JC) <sigma^z_i>(t).

    Energy drift is checked on ``energy_samples`` evenly spread samples.
    """
    err = H.hermiticity_error()
    if err > 1e-12:
        raise ValueError(f"Hamiltonian is not Hermitian (max |H - H^dag| = {err:.3g})")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-9:
        raise ValueError("initial state is not normalized")
    times = np.asarray(times, dtype=float)
    basis = H.basis
    T = len(times)
    n = np.empty((basis.N, T))
    sz = np.empty((basis.N, T)) if basis.kind == "jc" else None
    norms = np.empty(T)
    exc = np.empty(T)
    check = set(np.unique(np.linspace(0, T - 1, min(T, energy_samples)).astype(int)).tolist())
    energy = {}

    def record(idx, states):
        prob = np.abs(states) ** 2
        n[:, idx] = (prob @ basis.n).T
        if sz is not None:
            sz[:, idx] = (prob @ (2 * basis.s - 1)).T
        norms[idx] = prob.sum(axis=1)
        exc[idx] = prob @ basis.excitations
        for j, i in enumerate(idx.tolist()):
            if i in check:
                energy[i] = np.vdot(states[j], H.matrix @ states[j]).real

    if method == "krylov":
        krylov_propagate(H.matrix, psi0, times, krylov_dim=krylov_dim, tol=tol, callback=record)
    elif method == "dense":
        record(np.arange(T), dense_propagate(H.matrix, psi0, times))
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    e = np.array([energy[i] for i in sorted(energy)])
    meta = {
        "propagator": method,
        "dim": basis.dim,
        "sector": basis.M,
        "norm_drift": float(np.max(np.abs(np.sqrt(norms) - 1))),
        "excitation_drift": float(np.max(np.abs(exc - exc[0]))),
        "energy_drift": float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1.0)),
    }
    meta["conserved_drift"] = meta["excitation_drift"]
    return Trajectory(times=times, n=n, sz=sz, meta=meta)


def simulate(spec: NetworkSpec, model: UnitModel, Np: int, times, *,
             realization: DisorderRealization | None = None, sector: bool = True,
             cap: int = DEFAULT_DIM_CAP, test_site: int = 0, **kw) -> Trajectory:
    """Build basis + Hamiltonian and evolve the standard initial Fock state.

    With ``sector=True`` (default) only the M = Np excitation sector is used.
    """
    kind = _model_kind(model)
    basis = build_basis(spec.N, Np, kind, Np if sector else None, cap=cap)
    H = assemble_hamiltonian(spec, model, basis, realization)
    psi0 = initial_fock_state(basis, test_site, Np)
    traj = evolve(H, psi0, times, **kw)
    traj.meta["engine"] = "quantum"
    return traj


# --- checkpoints -------------------------------------------------------------------
# layout: uint64 dimension (little endian), then dim pairs of float64 (re, im), LE.

def write_state(path, psi: np.ndarray) -> None:
    psi = np.ascontiguousarray(psi, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", psi.shape[0]))
        fh.write(psi.tobytes())


def read_state(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (dim,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.shape[0] != dim:
        raise ValueError(f"checkpoint declares {dim} amplitudes but holds {data.shape[0]}")
    return data.astype(complex)
