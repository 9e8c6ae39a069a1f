"""Closed-form imbalance of harmonic networks and a correlation-matrix oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import Trajectory


@dataclass(frozen=True)
class HarmonicParams:
    """Harmonic network loaded with ``Np`` bosons in unit 0.

    ``D=None`` means all-to-all coupling.  Results do not depend on
    ``omega_c``; it is kept only so callers can pass one config around.
    """

    N: int
    D: int | None = None
    J: float = 1.0
    omega_c: float = 1.0
    Np: int = 10

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.Np < 1:
            raise ValueError("Np must be >= 1")
        if self.D is not None and self.D >= math.ceil(self.N / 2):
            object.__setattr__(self, "D", None)

    @property
    def is_all_to_all(self) -> bool:
        return self.D is None


def f_of_k(N: int, D: int, k):
    """Band function sum_{d=1}^{D} cos(2 pi k d / N) in closed form, k in 1..N-1."""
    k = np.asarray(k)
    if np.any((k <= 0) | (k >= N)):
        raise ValueError("k must lie in 1..N-1; the k=0 mode is handled separately")
    x = np.pi * k / N
    return np.cos((D + 1) * x) * np.sin(D * x) / np.sin(x)


def imbalance_finite_range(p: HarmonicParams, t) -> np.ndarray:
    """P(t) for a ring with D < ceil(N/2) neighbours per side."""
    if p.is_all_to_all:
        raise ValueError("imbalance_finite_range requires D < ceil(N/2); use imbalance_all_to_all")
    N, D, J, Np = p.N, p.D, p.J, p.Np
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f = f_of_k(N, D, np.arange(1, N))
    phase = np.exp(2j * J * np.outer(t, f))  # (T, N-1)
    # sum_{k,k'} exp[i 2Jt (f(k') - f(k))]
    double = np.einsum("tk,tl->t", phase.conj(), phase)
    if np.max(np.abs(double.imag), initial=0.0) > 1e-10 * max(1.0, (N - 1) ** 2):
        raise ArithmeticError("double sum acquired an imaginary part")
    cross = 2 * np.cos(2 * J * np.outer(t, f - D)).sum(axis=1)
    return 2 * Np / N**2 * (1 + double.real + cross) - Np


def imbalance_all_to_all(p: HarmonicParams, t) -> np.ndarray:
    N, J, Np = p.N, p.J, p.Np
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return Np / N**2 * (1 + (N - 1) * (N + 4 * np.cos(N * J * t) - 3))


def imbalance(p: HarmonicParams, t) -> np.ndarray:
    if p.is_all_to_all:
        return imbalance_all_to_all(p, t)
    return imbalance_finite_range(p, t)


def eta_all_to_all_closed_form(N: int) -> float:
    if N < 2:
        raise ValueError("N must be >= 2")
    return 1 - 4 / N + 4 / N**2


def all_to_all_period(N: int, J: float = 1.0) -> float:
    return 2 * np.pi / (N * J)


def initial_correlation(N: int, Np: int, test_site: int = 0) -> np.ndarray:
    """C(0) = <x x^dag> for Np bosons in ``test_site``: C_ii = n_i + 1."""
    C = np.eye(N, dtype=complex)
    C[test_site, test_site] += Np
    return C


def propagate_correlation_matrix(h: np.ndarray, C0: np.ndarray, t) -> np.ndarray:
    """C(t) = exp(-iht) C0 exp(iht) via eigendecomposition of h.

    Scalar ``t`` returns an (N, N) matrix; an array returns (T, N, N).
    """
    h = np.asarray(h)
    if not np.allclose(h, h.conj().T, rtol=0, atol=1e-12):
        raise ValueError("h must be Hermitian")
    E, V = np.linalg.eigh(h)
    C0v = V.conj().T @ C0 @ V
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    ph = np.exp(-1j * np.outer(ts, E))  # (T, N)
    Ct = V @ (ph[:, :, None] * C0v[None] * ph.conj()[:, None, :]) @ V.conj().T
    return Ct[0] if np.ndim(t) == 0 else Ct


def imbalance_from_correlation(C: np.ndarray) -> np.ndarray:
    """P = 2 C_00 - tr C + (N - 2) for one or a stack of correlation matrices."""
    C = np.asarray(C)
    N = C.shape[-1]
    return (2 * C[..., 0, 0] - np.trace(C, axis1=-2, axis2=-1) + (N - 2)).real


def occupations_from_correlation(C: np.ndarray) -> np.ndarray:
    """n_i(t) = C_ii - 1, returned as (N, T)."""
    d = np.diagonal(np.asarray(C), axis1=-2, axis2=-1).real - 1
    return d.T


def correlation_trajectory(h: np.ndarray, Np: int, times) -> Trajectory:
    times = np.asarray(times, dtype=float)
    C0 = initial_correlation(h.shape[0], Np)
    chunk = max(1, 2_000_000 // h.shape[0] ** 2)
    n = np.hstack([
        occupations_from_correlation(propagate_correlation_matrix(h, C0, times[s:s + chunk]))
        for s in range(0, len(times), chunk)
    ])
    return Trajectory(times=times, n=n, meta={"engine": "harmonic-matrix"})


def amplitude_trajectory(h: np.ndarray, Np: int, times) -> Trajectory:
    """n_i(t) = Np |<i| exp(-iht) |0>|^2, the diagonal of C(t) - 1 for this C(0).

    Only the first column of the propagator is needed, so this costs
    O(N^2 T) instead of the O(N^3 T) of full correlation-matrix propagation.
    """
    h = np.asarray(h)
    if not np.allclose(h, h.conj().T, rtol=0, atol=1e-12):
        raise ValueError("h must be Hermitian")
    times = np.asarray(times, dtype=float)
    E, V = np.linalg.eigh(h)
    c = V[0].conj()  # V^dag e_0
    n = Np * np.abs(V @ (c[:, None] * np.exp(-1j * np.outer(E, times)))) ** 2
    return Trajectory(times=times, n=n, meta={"engine": "harmonic-amplitude"})


def harmonic_trajectory(h: np.ndarray, Np: int, times, params: HarmonicParams | None = None) -> Trajectory:
    """Occupations from the single-mode amplitude; P from the closed form when given.

    ``params`` should only be passed for a clean network described by ``h``;
    the largest closed-form vs matrix discrepancy is kept in ``meta``.
    """
    times = np.asarray(times, dtype=float)
    traj = amplitude_trajectory(h, Np, times)
    if params is not None:
        P = imbalance(params, times)
        traj.meta["closed_form_max_dev"] = float(np.max(np.abs(P - traj.P)))
        traj.P = P
    traj.meta["engine"] = "harmonic"
    return traj
