"""Imbalance-derived metrics: P(t), eta, P_min, Z(t) and the N* detector."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def imbalance(n: np.ndarray) -> np.ndarray:
    """P = 2 n_0 - sum_j n_j for occupations shaped (N, T) or (N,)."""
    n = np.asarray(n)
    return 2 * n[0] - n.sum(axis=0)


@dataclass
class Trajectory:
    """Sampled time series of site occupations.

    ``n`` has shape (N, T).  ``sz`` holds qubit <sigma^z_i> for JC runs and
    ``Z`` the dissipative imbalance ratio for open runs (NaN where undefined).
    """

    times: np.ndarray
    n: np.ndarray
    P: np.ndarray | None = None
    Z: np.ndarray | None = None
    sz: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.n = np.atleast_2d(np.asarray(self.n, dtype=float))
        if self.n.shape[1] != self.times.shape[0]:
            raise ValueError(f"occupations shape {self.n.shape} does not match {len(self.times)} samples")
        if self.P is None:
            self.P = imbalance(self.n)

    @property
    def N(self) -> int:
        return self.n.shape[0]

    @property
    def total(self) -> np.ndarray:
        return self.n.sum(axis=0)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class LocalizationSummary:
    eta: float
    P_min: float
    t_at_min: float
    t_max: float
    Np: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "P_min": self.P_min,
            "t_at_min": self.t_at_min,
            "t_max": self.t_max,
            "Np": self.Np,
            "params": self.params,
        }


def eta_from_imbalance(P: np.ndarray, Np: float) -> float:
    return (Np + float(np.min(P))) / (2 * Np)


def eta_from_trajectory(traj: Trajectory, Np: float, params: dict | None = None) -> LocalizationSummary:
    """Degree of localization (Np + P_min) / (2 Np) over the sampled window."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    k = int(np.argmin(traj.P))
    p_min = float(traj.P[k])
    eta = (Np + p_min) / (2 * Np)
    # grid rounding can push eta a hair outside [0, 1]
    eta = min(max(eta, 0.0), 1.0)
    return LocalizationSummary(
        eta=eta,
        P_min=p_min,
        t_at_min=float(traj.times[k]),
        t_max=float(traj.times[-1]),
        Np=Np,
        params=dict(params or {}),
    )


def z_ratio(n: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """P / sum_j n_j, NaN from the first sample whose total drops below ``floor``."""
    n = np.asarray(n)
    tot = n.sum(axis=0)
    Z = np.full(tot.shape, np.nan)
    ok = tot >= floor
    if not ok.all():
        ok[np.argmin(ok):] = False
    Z[ok] = imbalance(n[:, ok]) / tot[ok]
    return Z


def first_drop_time(times: np.ndarray, values: np.ndarray, threshold: float) -> float:
    """First sampled time at which ``values`` falls below ``threshold`` (or is NaN).

    Returns the last sampled time if it never does.
    """
    bad = ~(np.asarray(values) >= threshold)
    if not bad.any():
        return float(times[-1])
    return float(times[np.argmax(bad)])


def detect_n_star(Ns: Sequence[int], etas: Sequence[float]) -> int | None:
    """Unit count at which eta(N) turns from decreasing to increasing.

    The discrete argmin of eta, ties broken toward smaller N.  None when the
    series has no interior minimum followed by a rise (e.g. monotone data).
    """
    Ns = np.asarray(Ns)
    etas = np.asarray(etas, dtype=float)
    if len(Ns) != len(etas) or len(Ns) == 0:
        raise ValueError("Ns and etas must be non-empty and of equal length")
    order = np.argsort(Ns, kind="stable")
    Ns, etas = Ns[order], etas[order]
    k = int(np.argmin(etas))  # first occurrence -> smaller N on ties
    if k == 0 or k == len(etas) - 1:
        return None
    if not etas[:k].max() > etas[k] or not etas[k + 1:].max() > etas[k]:
        return None
    return int(Ns[k])
